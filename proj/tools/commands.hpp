#pragma once

#include "CLI11.hpp"

namespace eager::cli {

void register_gen_dataset(CLI::App& app);
void register_train_qa(CLI::App& app);
void register_eval_qa(CLI::App& app);
void register_train_agent(CLI::App& app);
void register_plot(CLI::App& app);

}  // namespace eager::cli
