// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <iostream>

#include "cers/errors.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale histopathology toolkit: tiling, embedding-bag MIL, "
               "open-set detection, adapters, and evaluation statistics"};
  app.require_subcommand(1);

  using namespace cers::cli;
  register_tile(app);
  register_synth(app);
  register_train_mil(app);
  register_topk(app);
  register_train_arpl(app);
  register_detect(app);
  register_probe(app);
  register_zeroshot(app);
  register_textmetrics(app);
  register_calibrate(app);
  register_eval(app);
  register_report(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const cers::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cers::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const cers::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
