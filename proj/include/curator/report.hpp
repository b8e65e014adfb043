#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "curator/corpus.hpp"

namespace curator::report {

// Per-stage funnel, stable ordering for snapshot tests.
std::string render_text(const Manifest& manifest);
nlohmann::json render_structured(const Manifest& manifest);

}  // namespace curator::report
