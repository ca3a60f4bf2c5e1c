// tabunas: search, score, eval and enumerate from the command line.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tabunas/artifacts.hpp"
#include "tabunas/commands.hpp"
#include "tabunas/errors.hpp"
#include "tabunas/parallel.hpp"

using namespace tabunas;
using nlohmann::json;

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t workers = default_workers();
  bool toy = false;
  std::string genome_path;
};

// Flags override the file; --toy selects the preset. Seed and output directory
// fall back to 0 and ./tabunas-run.
RunConfig load_run_config(const Flags& f) {
  json j = json::object();
  if (!f.config_path.empty()) {
    const std::string text = read_text(f.config_path);
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(f.config_path + ": not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ParseError(f.config_path + ": expected a JSON object");
  }
  if (f.toy) j["preset"] = "toy";
  if (f.seed) j["seed"] = *f.seed;
  if (!f.out.empty()) j["output_dir"] = f.out;
  if (!j.contains("seed")) j["seed"] = 0;
  if (!j.contains("output_dir")) j["output_dir"] = "tabunas-run";
  return parse_config(j);
}

void log_line(const std::string& msg) { std::cerr << "[tabunas] " << msg << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Architecture search with a training-free score and assisted tabu search"};
  app.require_subcommand(1);
  Flags f;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", f.config_path, "JSON run configuration");
    cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
    cmd->add_option("--out", f.out, "output directory (overrides the config)");
    cmd->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--toy", f.toy, "use the small enumerable toy space");
  };
  CLI::App* search = app.add_subcommand("search", "run the full search and write a run directory");
  CLI::App* score = app.add_subcommand("score", "score one genome file without training");
  CLI::App* eval = app.add_subcommand("eval", "train and grade one genome file");
  CLI::App* enumerate =
      app.add_subcommand("enumerate", "train and grade every genome of a small space");
  for (CLI::App* cmd : {search, score, eval, enumerate}) add_common(cmd);
  for (CLI::App* cmd : {score, eval}) {
    cmd->add_option("genome", f.genome_path, "genome JSON file")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cout << error_record("usage_error", e.what()).dump() << std::endl;
    app.exit(e);
    return 2;
  }

  try {
    const RunConfig config = load_run_config(f);
    if (*search) {
      const SearchOutcome out = cmd_search(config, f.workers, log_line);
      std::cout << json{{"status", "ok"},
                        {"run_dir", out.run_dir.string()},
                        {"best", out.result.best.hash.hex()},
                        {"grade", out.result.best.eval.grade.grade}}
                       .dump()
                << std::endl;
    } else if (*score) {
      std::cout << cmd_score(load_genome(f.genome_path), config).dump() << std::endl;
    } else if (*eval) {
      std::cout << cmd_eval(load_genome(f.genome_path), config).dump() << std::endl;
    } else if (*enumerate) {
      const auto rows = cmd_enumerate(config, f.workers, log_line);
      double best = -1.0;
      std::string best_hash;
      for (const auto& r : rows) {
        if (r.eval.grade.grade > best) {
          best = r.eval.grade.grade;
          best_hash = r.hash.hex();
        }
      }
      std::cout << json{{"status", "ok"}, {"genomes", rows.size()}, {"best", best_hash}, {"grade", best}}
                       .dump()
                << std::endl;
    }
    return 0;
  } catch (const Error& e) {
    log_line(std::string("error: ") + e.what());
    std::cout << error_record(e.kind(), e.what()).dump() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    log_line(std::string("error: ") + e.what());
    std::cout << error_record("internal_error", e.what()).dump() << std::endl;
    return 1;
  }
}
