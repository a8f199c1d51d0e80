#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace vmd {

struct OpCheck {
    std::string op;
    double max_rel_err = 0.0;
};

struct GradcheckReport {
    std::vector<OpCheck> ops;
    double objective_err = -1.0;  // < 0 when the objective check was skipped
    double threshold = 1e-4;

    bool pass() const;
    nlohmann::ordered_json to_json() const;
    std::string to_text() const;
};

// Every differentiable op this registry knows; the report covers each one.
std::vector<std::string> registered_gradcheck_ops();

// Central-difference checks over 10 random small tensors per op, plus the full
// training objective on a 4-sample synthetic batch differentiated against
// every model parameter (frozen noise draws). only_op restricts the run to a
// single named op and skips the objective.
GradcheckReport run_gradcheck(const std::string& only_op = "");

}  // namespace vmd
