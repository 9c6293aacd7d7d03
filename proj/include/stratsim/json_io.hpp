// JSON encodings for models, step reports and verdicts, shared by the
// trajectory stream and the run summary. Key order is fixed so identical
// runs serialize to identical bytes.
#pragma once

#include <json.hpp>

#include "stratsim/dynamics.hpp"
#include "stratsim/models.hpp"

namespace stratsim {

using OrderedJson = nlohmann::ordered_json;

OrderedJson model_to_json(const Model& model);
OrderedJson verdict_to_json(const Verdict& verdict);

// One trajectory line: step index, zero-loss flag, and per-service loss,
// class-split usage totals and a model summary.
OrderedJson step_report_to_json(const StepReport& report, const Dataset& data);

}  // namespace stratsim
