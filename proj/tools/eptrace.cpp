#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "eptrace/io/config.hpp"
#include "eptrace/io/run.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& out_dir, const std::string& format,
                const std::optional<std::uint64_t>& seed) {
    using namespace eptrace;
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
        std::cerr << "eptrace: IoError: cannot read " << config_path << "\n";
        return 1;
    }
    std::stringstream buf;
    buf << in.rdbuf();

    io::RunConfig cfg;
    try {
        cfg = io::parse_config(buf.str());
    } catch (const io::SchemaError& e) {
        std::cerr << "eptrace: " << e.what() << "\n";
        return 1;
    }
    if (!out_dir.empty()) cfg.output.dir = out_dir;
    if (format == "csv") cfg.output.format = io::OutputFormat::csv;
    if (format == "json") cfg.output.format = io::OutputFormat::json;
    if (seed) cfg.seed = *seed;

    const io::RunResult res = io::run(cfg);
    try {
        io::emit(res, cfg.output.dir);
    } catch (const Error& e) {
        std::cerr << "eptrace: " << e.what() << "\n";
        return 1;
    }
    const auto& env = res.envelope;
    std::cout << env["task"].get<std::string>() << ": " << env["status"].get<std::string>() << " ("
              << env["warnings"].size() << " warning(s)) -> " << cfg.output.dir << "\n";
    if (!env["error"].is_null()) std::cerr << "eptrace: " << env["error"]["message"].get<std::string>() << "\n";
    return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Non-Hermitian Hamiltonian toolkit: eigensystems, exceptional points, S-matrices"};
    app.set_version_flag("--version", std::string(eptrace::io::version));
    app.require_subcommand(1);

    std::string config_path, out_dir, format;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "Run the task described by a JSON config");
    run->add_option("config", config_path, "Path to the JSON config")->required();
    run->add_option("--out", out_dir, "Output directory (overrides output.dir)");
    run->add_option("--format", format, "Payload format (overrides output.format)")
        ->check(CLI::IsMember({"csv", "json"}));
    run->add_option("--seed", seed, "Seed for randomly drawn model components (overrides seed)");

    CLI11_PARSE(app, argc, argv);
    return run_command(config_path, out_dir, format, seed);
}
