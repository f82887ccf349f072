// epskit command-line front end.
//
//   epskit <design|sweep|simulate|stability|analyze> --config <path>
//          [--set section.key=value]... [--out dir] [--seed u64]
//          [--materials path] [--input counts.csv]
//
// Exit codes: 0 ok, 2 config error, 3 domain/solver error, 4 I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "epskit/commands.hpp"

#ifndef EPSKIT_DEFAULT_MATERIALS
#define EPSKIT_DEFAULT_MATERIALS "data/materials.json"
#endif

namespace fs = std::filesystem;

namespace {

int exit_code(epskit::ErrorKind k) {
  switch (k) {
  case epskit::ErrorKind::Config: return 2;
  case epskit::ErrorKind::Domain: return 3;
  case epskit::ErrorKind::Io: return 4;
  }
  return 1;
}

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw epskit::IoError("cli", fmt::format("cannot open config '{}'", p.string()));
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"SPDC entangled-photon-source design and simulation toolkit", "epskit"};
  std::string command, config_path, out_dir, materials, input;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  app.add_option("command", command, "design | sweep | simulate | stability | analyze")->required();
  app.add_option("--config", config_path, "run configuration file")->required();
  app.add_option("--set", sets, "override a config key, section.key=value (repeatable)");
  auto *out_opt = app.add_option("--out", out_dir, "output directory (default: [run] output_dir)");
  auto *seed_opt = app.add_option("--seed", seed, "master seed (default: [run] seed)");
  app.add_option("--materials", materials, "materials database (default: [materials] database or built-in)");
  app.add_option("--input", input, "count-record CSV for analyze");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cmd = epskit::parse_command(command);
    if (!cmd) throw epskit::ConfigError("cli", fmt::format("unknown command '{}'", command));

    const fs::path cfg_file(config_path);
    auto cfg = epskit::parse_config(slurp(cfg_file), cfg_file.string(), sets);
    if (*seed_opt) cfg.seed = seed;

    fs::path db_path = EPSKIT_DEFAULT_MATERIALS;
    if (!materials.empty()) db_path = materials;
    else if (!cfg.materials_database.empty()) {
      db_path = cfg.materials_database;
      if (db_path.is_relative()) db_path = cfg_file.parent_path() / db_path;
    }
    const auto db = epskit::MaterialDatabase::load(db_path);

    const fs::path out = *out_opt ? fs::path(out_dir) : fs::path(cfg.output_dir);
    std::optional<fs::path> in;
    if (!input.empty()) in = fs::path(input);
    const auto result = epskit::run_command(*cmd, cfg, db, out, in);
    std::cout << result.summary;
    for (const auto &f : result.files) std::cout << "wrote " << f.string() << '\n';
    return 0;
  } catch (const epskit::Error &e) {
    std::cerr << "epskit: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception &e) {
    std::cerr << "epskit: " << e.what() << '\n';
    return 1;
  }
}
