#pragma once

// Build and simulate drivers shared by the CLI and the tests.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "macres/encoder.hpp"
#include "macres/evaluator.hpp"
#include "macres/io.hpp"
#include "macres/log.hpp"

namespace macres::experiment {

/// Target outside the dominant face.
class Infeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BuildConfig {
    io::ChannelSpec spec;
    std::string mode = "auto";  // auto | case1 | case2 | multi
    std::size_t length = 8;     // N
    std::size_t k = 1;
    double xi = 0.0;
    double beta = polar::kDefaultBeta;
    std::optional<double> target_r1;
    std::optional<double> eps;
    std::uint64_t seed = 0;
    bool idealized = false;
    double delta_override = 0.0;
    bool recycling = true;
    std::vector<std::size_t> order;  // zero-based; empty = identity
    bool approximate_profile = false;
};

struct Built {
    encoder::MacCode code;
    io::DescriptorExtras extras;
};

inline encoder::Mode resolve_mode(const BuildConfig& cfg) {
    const auto& ch = cfg.spec.channel;
    if (cfg.mode == "auto") return ch.num_inputs() == 2 ? encoder::classify_case(ch, cfg.spec.inputs) : encoder::Mode::Multi;
    return encoder::mode_from_name(cfg.mode);
}

inline Built build(const BuildConfig& cfg) {
    if (!(cfg.xi >= 0.0)) throw std::invalid_argument("--xi must be >= 0");
    if (!cfg.idealized && !(cfg.xi > 0.0)) throw std::invalid_argument("--xi must be > 0 unless --idealized is set");
    if (!(cfg.beta > 0.0 && cfg.beta < 0.5)) throw std::invalid_argument("--beta must lie in (0, 1/2)");
    if (cfg.k < 1) throw std::invalid_argument("--k must be >= 1");
    if (cfg.target_r1 && cfg.eps) throw std::invalid_argument("give either --target-r1 or --eps, not both");

    const auto& ch = cfg.spec.channel;
    const auto& in = cfg.spec.inputs;
    const encoder::Mode mode = resolve_mode(cfg);
    std::optional<ratesplit::SplitPoint> split;
    if (mode == encoder::Mode::Case1) {
        const double q = in[1][1];
        if (cfg.eps) {
            split = ratesplit::split_rates(ch, in[0], q, *cfg.eps);
        } else {
            const auto [lo, hi] = ratesplit::r1_interval(ch, in[0], q);
            const double target = cfg.target_r1.value_or(0.5 * (lo + hi));
            try {
                split = ratesplit::solve_eps(ch, in[0], q, target);
            } catch (const std::domain_error& e) {
                throw Infeasible(e.what());
            }
        }
        log::info("split eps = " + io::fmt_double(split->eps) + ", R1 = " + io::fmt_double(split->r1));
    } else if (cfg.target_r1 || cfg.eps) {
        log::warn("--target-r1/--eps ignored: rate splitting only applies to case 1 channels");
    }

    encoder::BuildOptions opts;
    opts.beta = cfg.beta;
    opts.plan.idealized = cfg.idealized;
    opts.plan.delta_override = cfg.delta_override;
    opts.plan.recycling = cfg.recycling;
    opts.profile.allow_approximate = cfg.approximate_profile;
    opts.profile.mc_seed = Rng(cfg.seed).split(7).key();

    Rng rng = Rng(cfg.seed).split(0);
    Built out;
    out.code = encoder::assemble_code(ch, in, mode, split, cfg.order, cfg.length, cfg.k, cfg.xi, opts, rng);
    out.extras = {cfg.beta, cfg.delta_override, cfg.seed};
    return out;
}

enum class EvalMode { Auto, Exact, Mc };

struct SimConfig {
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;  // never affects results
    std::size_t window = 2;
    std::size_t indep_window = 2;
    std::size_t recycled_bits = 4;
    EvalMode mode = EvalMode::Auto;
};

inline const char* eval_mode_name(EvalMode m) {
    switch (m) {
        case EvalMode::Auto: return "auto";
        case EvalMode::Exact: return "exact";
        case EvalMode::Mc: return "mc";
    }
    return "auto";
}

/// Canonical text of the result-determining settings.
inline std::string config_text(const SimConfig& c) {
    io::Json j;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["window"] = c.window;
    j["indep_window"] = c.indep_window;
    j["recycled_bits"] = c.recycled_bits;
    j["mode"] = eval_mode_name(c.mode);
    return j.dump();
}

namespace detail {

inline std::string subset_name(std::uint32_t mask, std::size_t users) {
    std::string s;
    for (std::size_t l = 0; l < users; ++l)
        if (mask & (1u << l)) s += std::to_string(l + 1);
    return s;
}

inline void add_rates(io::RunReport& rep, const encoder::MacCode& code) {
    const auto rates = encoder::achieved_rates(code.plan);
    const auto limits = encoder::rate_limits(code.plan);
    for (std::size_t s = 0; s < rates.per_stream.size(); ++s)
        rep.formula("rate.stream." + code.layout.names[s], rates.per_stream[s].value());
    const std::size_t users = rates.per_user.size();
    for (std::size_t l = 0; l < users; ++l) {
        rep.formula("rate.user" + std::to_string(l + 1), rates.per_user[l].value());
        rep.formula("rate_limit.user" + std::to_string(l + 1), limits.per_user[l]);
    }
    const auto reg = evaluator::region_from_joint(channel_joint(code.channel, code.inputs), users);
    for (const auto& c : reg.constraints) {
        double finite = 0.0, limit = 0.0;
        for (std::size_t l = 0; l < users; ++l)
            if (c.mask & (1u << l)) {
                finite += rates.per_user[l].value();
                limit += limits.per_user[l];
            }
        const std::string tag = detail::subset_name(c.mask, users);
        rep.formula("region.bound." + tag, c.bound);
        rep.formula("region.member_finite_k." + tag, finite >= c.bound - evaluator::kRegionTol ? 1.0 : 0.0);
        rep.formula("region.member_limit." + tag, limit >= c.bound - evaluator::kRegionTol ? 1.0 : 0.0);
    }
}

inline double add_bounds(io::RunReport& rep, const encoder::MacCode& code) {
    const auto exact_delta = evaluator::codec_delta(code);
    double dn = 0.0;
    if (exact_delta) {
        dn = *exact_delta;
        rep.exact("codec.delta", dn);
    } else {
        for (const auto& s : code.streams) dn = std::max(dn, s.code.profile.delta_n);
        rep.formula("codec.delta", dn);
    }
    const std::size_t users = code.mode == encoder::Mode::Multi ? code.layout.users.size() : 0;
    const auto b = evaluator::bound_curves(dn, code.length(), code.plan.xi, code.blocks(), users);
    rep.formula("bound.delta0", b.delta0);
    for (std::size_t i = 0; i < b.delta_i.size(); ++i) rep.formula("bound.delta_i.block" + std::to_string(i + 1), b.delta_i[i]);
    for (std::size_t i = 0; i < b.delta1_i.size(); ++i) rep.formula("bound.delta1_i.block" + std::to_string(i + 2), b.delta1_i[i]);
    for (std::size_t i = 0; i < b.delta2_i.size(); ++i) rep.formula("bound.delta2_i.block" + std::to_string(i + 2), b.delta2_i[i]);
    rep.formula("bound.joint", b.joint);
    rep.meta["bounds_vacuous"] = b.vacuous;
    return dn;
}

}  // namespace detail

/// Thrown when exact evaluation is forced but does not fit.
class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline io::RunReport simulate(const encoder::MacCode& code, const std::string& descriptor, const SimConfig& cfg) {
    io::RunReport rep;
    rep.meta["format"] = "macres-report/1";
    rep.meta["config_hash"] = io::hex64(io::fnv1a(config_text(cfg)));
    rep.meta["descriptor_hash"] = io::hex64(io::fnv1a(descriptor));
    rep.meta["code_mode"] = encoder::mode_name(code.mode);
    rep.meta["N"] = code.length();
    rep.meta["k"] = code.blocks();
    rep.meta["idealized"] = code.plan.idealized;
    rep.meta["asymptotic_only"] = code.plan.asymptotic_only;
    rep.meta["local_random_bits_per_block"] = encoder::local_randomness_per_block(code);

    detail::add_rates(rep, code);
    detail::add_bounds(rep, code);

    std::optional<evaluator::ExhaustiveResult> ex;
    if (cfg.mode != EvalMode::Mc) {
        try {
            ex = evaluator::tv_exhaustive(code);
        } catch (const BudgetExceeded& e) {
            if (cfg.mode == EvalMode::Exact) throw BudgetError(std::string("exact evaluation does not fit: ") + e.what());
            log::info(std::string("exhaustive mode skipped: ") + e.what());
        }
    }
    const Dist qz = target_output_dist(code.channel, code.inputs);
    if (ex) {
        rep.meta["evaluation"] = "exact";
        rep.meta["paths"] = ex->paths;
        rep.exact("tv.joint", ex->joint_tv);
        for (std::size_t i = 0; i < ex->block_tv.size(); ++i) rep.exact("tv.block" + std::to_string(i + 1), ex->block_tv[i]);
        for (std::size_t i = 0; i < ex->inter_block_tv.size(); ++i) {
            const std::string b = ".block" + std::to_string(i + 2);
            rep.exact("indep.inter_block" + b, ex->inter_block_tv[i]);
            rep.exact("indep.recycled_vs_previous" + b, ex->recycled_dependence_tv[i]);
            rep.exact("indep.recycled_vs_history" + b, ex->history_dependence_tv[i]);
            rep.exact("indep.recycled_uniformity" + b, ex->recycled_uniformity_tv[i]);
        }
        if (code.length() % cfg.window == 0)
            rep.exact("tv.windowed", evaluator::windowed_tv_exact(ex->pmf, code.blocks(), code.length(), code.channel.output_size(),
                                                                  qz.pmf(), cfg.window));
        return rep;
    }

    if (cfg.trials < evaluator::kMinDiagnosticTrials)
        throw BudgetError("Monte-Carlo evaluation needs --trials >= " + std::to_string(evaluator::kMinDiagnosticTrials) +
                          " (got " + std::to_string(cfg.trials) + ")");
    rep.meta["evaluation"] = "mc";
    rep.meta["note"] = "windowed plug-in TV is biased upward by sampling noise; null_mean rows give that bias";
    const Rng master(cfg.seed);
    evaluator::McOptions opt;
    opt.trials = cfg.trials;
    opt.window = cfg.window;
    opt.indep_window = cfg.indep_window;
    opt.recycled_bits = cfg.recycled_bits;
    opt.workers = cfg.workers;
    const auto ts = evaluator::collect_samples(code, cfg.trials, master.split(1), cfg.workers, cfg.recycled_bits);
    const auto wt = evaluator::windowed_tv(ts, opt, master.split(2));
    rep.mc("tv.windowed", wt.overall);
    for (std::size_t i = 0; i < wt.per_block.size(); ++i) rep.mc("tv.windowed.block" + std::to_string(i + 1), wt.per_block[i]);
    if (code.blocks() > 1) {
        const auto ind = evaluator::independence_diagnostics(ts, opt, master.split(3));
        rep.mc("indep.recycled_vs_previous", ind.recycled_vs_previous);
        rep.mc("indep.inter_block", ind.inter_block);
    }
    return rep;
}

}  // namespace macres::experiment
