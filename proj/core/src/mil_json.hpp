// SPDX-License-Identifier: Apache-2.0
// Internal JSON conversions shared by the model file writers.
#pragma once

#include <nlohmann/json.hpp>

#include "cers/gated_mil.hpp"

namespace cers::detail {

nlohmann::json mil_model_to_json(const GatedMilModel& model);
GatedMilModel mil_model_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows,
                                 Eigen::Index cols, const char* name);
Eigen::VectorXd vector_from_json(const nlohmann::json& j, Eigen::Index n,
                                 const char* name);

}  // namespace cers::detail
