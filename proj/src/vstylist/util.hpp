#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace vstylist {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::array<std::uint8_t, 32> sha256_raw(std::string_view bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string read_text_file(const fs::path& path);

/// Writes to a sibling temp file and renames over the target, so a reader
/// never observes a half-written artifact.
void write_text_file_atomic(const fs::path& path, std::string_view content);

json read_json_file(const fs::path& path);

/// Canonical serialization used for every persisted artifact: 2-space indent,
/// sorted keys (nlohmann objects are ordered maps), trailing newline.
std::string dump_canonical(const json& doc);
void write_json_file(const fs::path& path, const json& doc);

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);

/// Replaces `{key}` occurrences for the keys supplied; other braces are left
/// untouched so templates may contain literal JSON examples.
std::string fill_template(std::string_view tmpl,
                          std::initializer_list<std::pair<std::string_view, std::string>> values);

/// Extracts the first balanced `{...}` span that parses as a JSON object.
std::optional<json> first_json_object(std::string_view text);

}  // namespace vstylist
