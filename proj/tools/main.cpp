#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "commands.hpp"
#include "ladderlab/error.hpp"
#include "ladderlab/io.hpp"
#include "run_config.hpp"

namespace {

using namespace ladderlab;
using namespace ladderlab::cli;

struct Flags {
    std::string config;
    std::vector<double> nu;
    std::string mass_range;
    std::optional<double> window;
    std::optional<double> psi_hat_radius;
    std::string mode;
    std::string eps_sweep;
    std::optional<std::uint64_t> seed;
    std::string cache_dir;
    std::string out_dir;
    bool include_negative_branch = false;
    bool include_zero_modes = false;
    std::string format;
};

void add_flags(CLI::App* cmd, Flags& f)
{
    cmd->add_option("--config", f.config, "RunConfig JSON file")->check(CLI::ExistingFile);
    cmd->add_option("--nu", f.nu, "energy level (repeatable)")->take_all()->allow_extra_args(false);
    cmd->add_option("--mass-range", f.mass_range, "mass grid A:B:STEP");
    cmd->add_option("--window", f.window, "sharp counting half-width C");
    cmd->add_option("--psi-hat-radius", f.psi_hat_radius, "support radius of the test function's Fourier transform");
    cmd->add_option("--mode", f.mode, "counting mode")->check(CLI::IsMember({"sharp", "smoothed"}));
    cmd->add_option("--eps-sweep", f.eps_sweep, "comma-separated Abel regularization parameters");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--cache-dir", f.cache_dir, "spectrum cache root (empty string disables the cache)");
    cmd->add_option("--out-dir", f.out_dir, "output directory");
    cmd->add_flag("--include-negative-branch", f.include_negative_branch, "count the mirrored negative branch too");
    cmd->add_flag("--include-zero-modes", f.include_zero_modes, "count lambda = 0 modes at m = 0");
    cmd->add_option("--format", f.format, "tabular output format")->check(CLI::IsMember({"csv", "json"}));
}

RunConfig resolve(const Flags& f, const CLI::App& cmd)
{
    RunConfig c = f.config.empty() ? default_config() : load_config(f.config);
    if (!f.nu.empty()) c.nu = f.nu;
    if (!f.mass_range.empty()) c.masses = parse_mass_range(f.mass_range);
    if (f.window) c.window = *f.window;
    if (f.psi_hat_radius) c.psi.hat_radius = *f.psi_hat_radius;
    // a lone --window or --psi-hat-radius selects its mode unless --mode says otherwise
    if (!f.mode.empty())
        c.mode = f.mode;
    else if (f.psi_hat_radius && !f.window)
        c.mode = "smoothed";
    else if (f.window && !f.psi_hat_radius)
        c.mode = "sharp";
    if (!f.eps_sweep.empty()) c.eps = parse_list(f.eps_sweep);
    if (f.seed) c.seed = *f.seed;
    if (f.include_negative_branch) c.include_negative_branch = true;
    if (f.include_zero_modes) c.include_zero_modes = true;
    if (!f.format.empty()) c.format = f.format;
    if (!f.out_dir.empty()) c.out_dir = f.out_dir;
    // precedence: --cache-dir, then LADDERLAB_CACHE, then the config file
    if (cmd.count("--cache-dir"))
        c.cache_dir = f.cache_dir;
    else
        c.cache_dir = resolve_cache_dir(c.cache_dir).string();
    validate(c);
    return c;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ladderlab: eigenvalue ladders of stationary spacetimes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ladderlab 0.1.0");

    using Command = std::function<int(const RunConfig&, std::ostream&, std::ostream&)>;
    const std::vector<std::tuple<std::string, std::string, Command>> commands = {
        {"spectrum", "compute and cache joint spectrum slices", cmd_spectrum},
        {"count", "sharp or smoothed eigenvalue counts", cmd_count},
        {"upsilon", "generating function, peaks and predicted singular support", cmd_upsilon},
        {"volume", "Liouville volume by closed form, quadrature and Monte Carlo", cmd_volume},
        {"flow", "Hamiltonian flow on the mass shell", cmd_flow},
        {"periods", "periods of the Killing flow on the energy level", cmd_periods},
        {"admissible", "classify energy levels", cmd_admissible},
        {"verify-weyl", "end-to-end Weyl law check", cmd_verify_weyl},
    };
    Flags flags;
    std::map<CLI::App*, Command> dispatch;
    for (const auto& [name, help, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        add_flags(sub, flags);
        dispatch[sub] = fn;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    for (auto& [sub, fn] : dispatch) {
        if (!sub->parsed()) continue;
        try {
            const RunConfig config = resolve(flags, *sub);
            return fn(config, std::cout, std::cerr);
        } catch (const ladderlab::Error& e) {
            std::cerr << "ladderlab: " << e.what() << "\n";
            return exit_code(e.kind());
        } catch (const std::filesystem::filesystem_error& e) {
            std::cerr << "ladderlab: " << e.what() << "\n";
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "ladderlab: " << e.what() << "\n";
            return 4;
        }
    }
    return 2;
}
