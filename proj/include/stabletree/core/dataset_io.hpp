#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "stabletree/core/schema.hpp"

namespace stabletree::core {

nlohmann::json schema_to_json(const Schema& schema);
Schema schema_from_json(const nlohmann::json& j);

Schema read_schema(const std::filesystem::path& path);
void write_schema(const Schema& schema, const std::filesystem::path& path);

enum class LabelPolicy { Optional, Required, Ignore };

/// Reads a headered CSV. Covariate columns are matched to the schema by name
/// (extra columns are an error); the label column may hold class names or
/// class indices. Errors carry the line and column of the offending cell.
Dataset read_csv(std::istream& in, const Schema& schema, LabelPolicy labels = LabelPolicy::Optional,
                 const std::string& source = "<stream>");
Dataset read_csv(const std::filesystem::path& path, const Schema& schema,
                 LabelPolicy labels = LabelPolicy::Optional);

void write_csv(std::ostream& out, const Dataset& data);
void write_csv(const std::filesystem::path& path, const Dataset& data);

/// FNV-1a over the raw file bytes.
std::uint64_t file_digest(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace stabletree::core
