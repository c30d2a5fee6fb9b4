#!/usr/bin/env python3
"""Validate every golden request/response pair against the endpoint schemas."""
import json
import pathlib
import sys

import jsonschema

HERE = pathlib.Path(__file__).resolve().parent
SCHEMA_FOR = {
    "/v1/text/generate": "text_generate",
    "/v1/vision/generate": "vision_generate",
    "/v1/render": "render",
    "/v1/embed": "embed",
    "/v1/score": "score",
}


def validator(schema, ref):
    doc = dict(schema)
    doc["$ref"] = "#/$defs/" + ref
    return jsonschema.Draft202012Validator(doc)


def main():
    error_schema = json.loads((HERE / "schemas" / "error.schema.json").read_text())
    failures = 0
    cases = sorted((HERE / "golden").glob("*.json"))
    for path in cases:
        case = json.loads(path.read_text())
        schema = json.loads((HERE / "schemas" / (SCHEMA_FOR[case["endpoint"]] + ".schema.json")).read_text())
        request_errors = list(validator(schema, "request").iter_errors(case["request"]))
        if case["status"] == 200:
            response_errors = list(validator(schema, "response").iter_errors(case["response"]))
            problems = request_errors + response_errors
        else:
            problems = list(jsonschema.Draft202012Validator(error_schema).iter_errors(case["response"]))
            if not request_errors:
                problems.append("error case request unexpectedly satisfies the request schema")
        for p in problems:
            failures += 1
            print(f"{path.name}: {getattr(p, 'message', p)}")
    print(f"{len(cases)} golden cases, {failures} problems")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
