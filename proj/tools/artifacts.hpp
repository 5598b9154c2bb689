#pragma once

#include <cstdint>
#include <string>

#include "config.hpp"

namespace bpl::cli {

// FNV-1a over the canonical (key-sorted, compact) dump.
std::uint64_t config_hash(const json& config);
std::string hex64(std::uint64_t h);

// Writes to a sibling temporary file and renames it over the target.
void write_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

// "a.b[2].c" → value dump, for field-by-field comparison of result documents.
std::vector<std::pair<std::string, std::string>> flatten(const json& j);

}  // namespace bpl::cli
