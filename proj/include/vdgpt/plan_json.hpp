#pragma once

// JSON views of the plan model, shared by the CLI and the HTTP service.

#include <json.hpp>

#include "vdgpt/plan.hpp"

namespace vdgpt {

using ojson = nlohmann::ordered_json;

ojson plan_to_json(const VideoPlan& plan);
/// Throws kParseError with the field path.
VideoPlan plan_from_json(const ojson& doc);

ojson box_to_json(const BoundingBox& b);
ojson report_to_json(const ValidationReport& report);

}  // namespace vdgpt
