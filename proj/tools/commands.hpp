// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <CLI11.hpp>

namespace cers::cli {

void register_tile(CLI::App& app);
void register_synth(CLI::App& app);
void register_train_mil(CLI::App& app);
void register_topk(CLI::App& app);
void register_train_arpl(CLI::App& app);
void register_detect(CLI::App& app);
void register_probe(CLI::App& app);
void register_zeroshot(CLI::App& app);
void register_textmetrics(CLI::App& app);
void register_calibrate(CLI::App& app);
void register_eval(CLI::App& app);
void register_report(CLI::App& app);

}  // namespace cers::cli
