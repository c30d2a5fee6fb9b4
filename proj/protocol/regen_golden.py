#!/usr/bin/env python3
"""Regenerate protocol/golden/*.json against a running mock server.

    vstylist mock-server --port 8765 &
    python3 protocol/regen_golden.py http://127.0.0.1:8765
"""
import base64
import json
import pathlib
import struct
import sys
import urllib.error
import urllib.request
import zlib

HERE = pathlib.Path(__file__).resolve().parent


def png(width, height, pixel):
    raw = b"".join(b"\x00" + b"".join(bytes(pixel(x, y)) for x in range(width)) for y in range(height))

    def chunk(tag, data):
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    data = b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", zlib.compress(raw, 9)) + chunk(b"IEND", b"")
    return base64.b64encode(data).decode()


GRAY = png(4, 4, lambda x, y: (128, 128, 128))
RAMP = png(4, 4, lambda x, y: (x * 60, y * 60, 200))
RED = png(4, 4, lambda x, y: (220, 30, 30))

SAMPLING = {"temperature": 0.7, "top_p": 0.95, "top_k": 10, "max_tokens": 512, "seed": 3}

CASES = {
    "text_generate_default": ("/v1/text/generate", {
        "messages": [{"role": "system", "content": [{"type": "text", "text": "You are terse."}]},
                     {"role": "user", "content": [{"type": "text", "text": "Say hello."}]}],
        "sampling": SAMPLING}),
    "text_generate_translate": ("/v1/text/generate", {
        "messages": [{"role": "user", "content": [{"type": "text", "text": "Convert the caption into a prompt."}]}],
        "sampling": SAMPLING, "task": "translate", "context": {"caption": "a red car on a street"}}),
    "text_generate_identify_style": ("/v1/text/generate", {
        "messages": [{"role": "user", "content": [{"type": "text", "text": "Pixel art style."}]}],
        "sampling": SAMPLING, "task": "identify_style", "context": {"query": "Pixel art style."}}),
    "vision_generate_caption": ("/v1/vision/generate", {
        "messages": [{"role": "user", "content": [{"type": "image", "image": RAMP},
                                                  {"type": "text", "text": "Describe the shot."}]}],
        "sampling": SAMPLING, "task": "caption"}),
    "vision_generate_style_score": ("/v1/vision/generate", {
        "messages": [{"role": "user", "content": [{"type": "image", "image": GRAY},
                                                  {"type": "text", "text": "Rate the style match."}]}],
        "sampling": SAMPLING, "task": "style_score",
        "context": {"style": "pixel art style", "round": 1, "attempt": 0,
                    "weights": {"tile": 0.2, "depth": 0.2, "softedge": 0.2, "lineart": 0.2}}}),
    "render_inline": ("/v1/render", {
        "model_file": "pixel_f2.safetensors", "base_model": "SD 1.5", "prompt": "pixel, pixel art style, red car",
        "frames": [GRAY, RAMP],
        "control": [{"type": "tile", "weight": 0.5}, {"type": "depth", "weight": 0.5},
                    {"type": "softedge", "weight": 0.5}, {"type": "lineart", "weight": 0.5}],
        "seed": 11, "extras": {"steps": "20"}}),
    "render_base_model": ("/v1/render", {
        "model_file": "", "base_model": "SD 1.5", "prompt": "a quiet lake", "negative_prompt": "blurry",
        "frames": [RED], "control": [{"type": "depth", "weight": 0.25}], "seed": 0, "extras": {}}),
    "embed_text": ("/v1/embed", {"modality": "text", "items": ["pixel art style", "a red car"]}),
    "embed_image": ("/v1/embed", {"modality": "image", "items": [GRAY]}),
    "score_aesthetic_i": ("/v1/score", {"kind": "aesthetic_i", "frames": [GRAY]}),
    "score_distortion_v": ("/v1/score", {"kind": "distortion_v", "frames": [GRAY, RED]}),
    "error_text_with_image": ("/v1/text/generate", {
        "messages": [{"role": "user", "content": [{"type": "image", "image": GRAY}]}], "sampling": SAMPLING}),
    "error_render_two_sources": ("/v1/render", {
        "model_file": "", "base_model": "SD 1.5", "prompt": "x", "frames": [GRAY],
        "frames_uri": "file:///tmp/frames", "control": [], "seed": 0}),
    "error_score_unknown_kind": ("/v1/score", {"kind": "sharpness", "frames": [GRAY]}),
}


def post(base, path, body):
    req = urllib.request.Request(base + path, data=json.dumps(body).encode(),
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as r:
            return r.status, json.loads(r.read())
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read())


def main():
    base = sys.argv[1].rstrip("/")
    for name, (path, body) in sorted(CASES.items()):
        status, response = post(base, path, body)
        doc = {"endpoint": path, "request": body, "status": status, "response": response}
        (HERE / "golden" / (name + ".json")).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        print(f"{name}: {status}")


if __name__ == "__main__":
    main()
