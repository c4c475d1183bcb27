#include <cstdio>
#include <exception>

#include "CLI11.hpp"

#include "commands.hpp"
#include "eager/util/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "eager - question-driven reward shaping for instruction-following "
      "agents"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from an INI file");

  eager::cli::register_gen_dataset(app);
  eager::cli::register_train_qa(app);
  eager::cli::register_eval_qa(app);
  eager::cli::register_train_agent(app);
  eager::cli::register_plot(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? eager::kExitOk : eager::kExitConfig;
  } catch (const eager::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return eager::kExitConfig;
  } catch (const eager::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return eager::kExitData;
  } catch (const eager::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return eager::kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return eager::kExitNumeric;
  }
  return eager::kExitOk;
}
