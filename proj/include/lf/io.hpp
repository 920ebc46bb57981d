#pragma once

#include <string>

#include <json.hpp>

#include "lf/ensemble.hpp"
#include "lf/forest.hpp"

namespace lf::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kModelFormat = 1;

class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

Json forest_to_json(const Forest& forest);
Forest forest_from_json(const Json& j);

Json cv_to_json(const CvResult& cv);
CvResult cv_from_json(const Json& j);

/// `extra` is stored verbatim under "provenance" (config hash, seed, ...).
Json model_to_json(const LassoedModel& model, const Json& extra = Json::object());
LassoedModel model_from_json(const Json& j);

/// Pretty-printed with a trailing newline; doubles round-trip exactly.
std::string dump(const Json& j);
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace lf::io
