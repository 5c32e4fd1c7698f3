// macres: region | build | simulate | sweep

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "macres/experiment.hpp"
#include "macres/io.hpp"
#include "macres/log.hpp"

namespace fs = std::filesystem;
using namespace macres;

namespace {

enum Exit : int { kOk = 0, kOther = 1, kInfeasible = 2, kAsymptotic = 3, kBudget = 4 };

struct Options {
    std::string channel;
    std::string mode = "auto";
    std::size_t n = 8;
    std::size_t k = 1;
    double xi = 0.0;
    double beta = polar::kDefaultBeta;
    std::optional<double> target_r1;
    std::optional<double> eps;
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
    bool idealized = false;
    double delta_override = 0.0;
    bool no_recycling = false;
    std::vector<std::size_t> order;
    bool approximate_profile = false;
    std::string out_dir = ".";
    std::size_t workers = 1;
    std::string descriptor;
    std::string eval = "auto";
    std::size_t window = 2;
    bool transcript = false;
    std::vector<std::size_t> ns;
    std::vector<std::size_t> ks;
    std::vector<double> eps_grid;
};

void ensure_dir(const std::string& d) { fs::create_directories(d); }

experiment::BuildConfig build_config(const Options& o) {
    experiment::BuildConfig c;
    c.spec = io::load_channel(o.channel);
    c.mode = o.mode;
    c.length = o.n;
    c.k = o.k;
    c.xi = o.xi;
    c.beta = o.beta;
    c.target_r1 = o.target_r1;
    c.eps = o.eps;
    c.seed = o.seed;
    c.idealized = o.idealized;
    c.delta_override = o.delta_override;
    c.recycling = !o.no_recycling;
    for (auto l : o.order) {
        if (l < 1) throw std::invalid_argument("--order lists users from 1");
        c.order.push_back(l - 1);
    }
    c.approximate_profile = o.approximate_profile;
    return c;
}

experiment::SimConfig sim_config(const Options& o) {
    experiment::SimConfig s;
    s.trials = o.trials;
    s.seed = o.seed;
    s.workers = std::max<std::size_t>(1, o.workers);
    s.window = o.window;
    s.mode = o.eval == "exact" ? experiment::EvalMode::Exact : o.eval == "mc" ? experiment::EvalMode::Mc : experiment::EvalMode::Auto;
    return s;
}

int cmd_region(const Options& o) {
    const auto spec = io::load_channel(o.channel);
    const auto& ch = spec.channel;
    const auto reg = ch.num_inputs() == 2 ? evaluator::region_2user(ch, spec.inputs[0], spec.inputs[1])
                                          : evaluator::region_multi(ch, spec.inputs);
    const auto j = io::region_to_json(reg);
    std::cout << j.dump(2) << "\n";
    ensure_dir(o.out_dir);
    io::write_file(o.out_dir + "/region.json", j.dump(2) + "\n");
    io::write_file(o.out_dir + "/region.csv", io::region_csv(reg));
    return kOk;
}

int cmd_build(const Options& o) {
    const auto built = experiment::build(build_config(o));
    ensure_dir(o.out_dir);
    const std::string text = io::descriptor_text(built.code, built.extras);
    io::write_file(o.out_dir + "/descriptor.json", text);
    io::write_file(o.out_dir + "/plan.json", io::plan_to_json(built.code.plan).dump(2) + "\n");
    io::write_profile_files(built.code, o.out_dir);
    log::info("descriptor hash " + io::hex64(io::fnv1a(text)));
    if (built.code.plan.asymptotic_only) {
        log::warn("plan is asymptotic-only: finite-N lengths were clamped; use --idealized to study the mechanism at this N");
        return kAsymptotic;
    }
    return kOk;
}

void write_report(const io::RunReport& rep, const std::string& dir) {
    ensure_dir(dir);
    io::write_file(dir + "/report.json", rep.to_json().dump(2) + "\n");
    io::write_file(dir + "/report.csv", rep.to_csv());
}

int cmd_simulate(const Options& o) {
    const std::string path = o.descriptor.empty() ? o.out_dir + "/descriptor.json" : o.descriptor;
    const std::string text = io::read_file(path);
    io::LoadedCode loaded = io::descriptor_from_json(io::Json::parse(text));
    const auto rep = experiment::simulate(loaded.code, text, sim_config(o));
    write_report(rep, o.out_dir);
    if (o.transcript) {
        const auto tr = encoder::simulate_trial(loaded.code, Rng(o.seed).split(1).split(0));
        io::write_file(o.out_dir + "/transcript.csv", io::transcript_csv(loaded.code, tr));
    }
    return kOk;
}

int cmd_sweep(const Options& o) {
    const auto base = build_config(o);
    std::vector<std::size_t> ns = o.ns.empty() ? std::vector<std::size_t>{o.n} : o.ns;
    std::vector<std::size_t> ks = o.ks.empty() ? std::vector<std::size_t>{o.k} : o.ks;
    std::vector<std::optional<double>> eg;
    if (o.eps_grid.empty()) eg.push_back(o.eps);
    for (double e : o.eps_grid) eg.emplace_back(e);
    std::ostringstream csv;
    csv << "N,k,eps,name,value,ci_lo,ci_hi,samples,mode\n";
    for (auto n : ns)
        for (auto k : ks)
            for (const auto& e : eg) {
                auto cfg = base;
                cfg.length = n;
                cfg.k = k;
                if (e) {
                    cfg.eps = e;
                    cfg.target_r1.reset();
                }
                const auto built = experiment::build(cfg);
                const std::string text = io::descriptor_text(built.code, built.extras);
                const auto rep = experiment::simulate(built.code, text, sim_config(o));
                const std::string eps_s = built.code.split ? io::fmt_double(built.code.split->eps) : "";
                std::istringstream rows(rep.to_csv());
                std::string line;
                std::getline(rows, line);  // header
                while (std::getline(rows, line)) csv << n << ',' << k << ',' << eps_s << ',' << line << '\n';
            }
    ensure_dir(o.out_dir);
    io::write_file(o.out_dir + "/sweep.csv", csv.str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MAC resolvability codes: region, build, simulate, sweep"};
    app.require_subcommand(1);
    Options o;

    auto add_build_flags = [&](CLI::App* sc) {
        sc->add_option("--channel", o.channel, "channel spec JSON")->required()->check(CLI::ExistingFile);
        sc->add_option("--mode", o.mode, "auto | case1 | case2 | multi")->check(CLI::IsMember({"auto", "case1", "case2", "multi"}));
        sc->add_option("--n", o.n, "block length N (power of two)");
        sc->add_option("--k", o.k, "number of blocks")->check(CLI::PositiveNumber);
        sc->add_option("--xi", o.xi, "slack xi (>= 0; > 0 unless --idealized)");
        sc->add_option("--beta", o.beta, "polarization exponent in (0, 1/2)");
        sc->add_option("--target-r1", o.target_r1, "case 1: target R1 on the dominant face");
        sc->add_option("--eps", o.eps, "case 1: split parameter in [0, 1]");
        sc->add_option("--seed", o.seed, "rng seed");
        sc->add_flag("--idealized", o.idealized, "use --xi and --delta-override as given instead of the finite-N formula");
        sc->add_option("--delta-override", o.delta_override, "delta used with --idealized");
        sc->add_flag("--no-recycling", o.no_recycling, "draw every block's seed fresh");
        sc->add_option("--order", o.order, "multi: user order, e.g. --order 2 1 3")->delimiter(',');
        sc->add_flag("--approximate-profile", o.approximate_profile, "allow Monte-Carlo polar profiles above the exact cap (N > 20)");
        sc->add_option("--out-dir", o.out_dir, "output directory");
    };
    auto add_sim_flags = [&](CLI::App* sc) {
        sc->add_option("--trials", o.trials, "Monte-Carlo trials (>= 1000)");
        sc->add_option("--workers", o.workers, "worker threads");
        sc->add_option("--eval", o.eval, "auto | exact | mc")->check(CLI::IsMember({"auto", "exact", "mc"}));
        sc->add_option("--window", o.window, "window length in symbols (1..3)");
    };

    auto* region = app.add_subcommand("region", "print the rate region of a channel");
    region->add_option("--channel", o.channel, "channel spec JSON")->required()->check(CLI::ExistingFile);
    region->add_option("--out-dir", o.out_dir, "output directory");

    auto* build = app.add_subcommand("build", "build a code and write its descriptor");
    add_build_flags(build);

    auto* simulate = app.add_subcommand("simulate", "evaluate a code descriptor");
    simulate->add_option("--descriptor", o.descriptor, "descriptor JSON (default: <out-dir>/descriptor.json)");
    simulate->add_option("--seed", o.seed, "rng seed");
    simulate->add_option("--out-dir", o.out_dir, "output directory");
    simulate->add_flag("--transcript", o.transcript, "also write one trial transcript");
    add_sim_flags(simulate);

    auto* sweep = app.add_subcommand("sweep", "build and evaluate over N, k and eps grids");
    add_build_flags(sweep);
    add_sim_flags(sweep);
    sweep->add_option("--ns", o.ns, "block lengths")->delimiter(',');
    sweep->add_option("--ks", o.ks, "block counts")->delimiter(',');
    sweep->add_option("--eps-grid", o.eps_grid, "split parameters")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (*region) return cmd_region(o);
        if (*build) return cmd_build(o);
        if (*simulate) return cmd_simulate(o);
        if (*sweep) return cmd_sweep(o);
    } catch (const experiment::Infeasible& e) {
        log::error(std::string("infeasible target: ") + e.what());
        return kInfeasible;
    } catch (const experiment::BudgetError& e) {
        log::error(e.what());
        return kBudget;
    } catch (const BudgetExceeded& e) {
        log::error(std::string("budget exceeded: ") + e.what());
        return kBudget;
    } catch (const std::exception& e) {
        log::error(e.what());
        return kOther;
    }
    return kOther;
}
