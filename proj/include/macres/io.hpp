#pragma once

// File formats: channel specs, code descriptors, run reports.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "macres/encoder.hpp"
#include "macres/evaluator.hpp"
#include "macres/hashing.hpp"
#include "macres/polar.hpp"
#include "macres/probcore.hpp"
#include "macres/ratesplit.hpp"

namespace macres::io {

using Json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

/// 64-bit FNV-1a, used to fingerprint configs and descriptors.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Channel spec

struct ChannelSpec {
    MacChannel channel;
    std::vector<Dist> inputs;
};

namespace detail {

inline const Json& field(const Json& j, const char* name, const std::string& where) {
    if (!j.is_object() || !j.contains(name)) throw FormatError(where + ": missing field '" + name + "'");
    return j.at(name);
}

inline std::vector<double> numbers(const Json& j, const std::string& where) {
    if (!j.is_array()) throw FormatError(where + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw FormatError(where + "[" + std::to_string(i) + "]: expected a number");
        out.push_back(j[i].get<double>());
    }
    return out;
}

}  // namespace detail

inline ChannelSpec channel_from_json(const Json& j) {
    using detail::field;
    const Json& in = field(j, "inputs", "channel");
    if (!in.is_array() || in.empty()) throw FormatError("channel.inputs: expected a non-empty array of alphabet sizes");
    std::vector<std::size_t> sizes;
    for (std::size_t l = 0; l < in.size(); ++l) {
        if (!in[l].is_number_unsigned() || in[l].get<std::size_t>() < 1)
            throw FormatError("channel.inputs[" + std::to_string(l) + "]: expected a positive integer");
        sizes.push_back(in[l].get<std::size_t>());
    }
    const Json& out = field(j, "output", "channel");
    if (!out.is_number_unsigned() || out.get<std::size_t>() < 1) throw FormatError("channel.output: expected a positive integer");
    const std::size_t nz = out.get<std::size_t>();

    std::size_t tuples = 1;
    for (auto s : sizes) tuples *= s;
    const Json& tr = field(j, "transition", "channel");
    if (!tr.is_array()) throw FormatError("channel.transition: expected an array of rows");
    if (tr.size() < tuples)
        throw FormatError("channel.transition: row " + std::to_string(tr.size()) + " is missing (" + std::to_string(tuples) +
                          " rows expected, one per input tuple)");
    if (tr.size() > tuples)
        throw FormatError("channel.transition: " + std::to_string(tr.size()) + " rows given, " + std::to_string(tuples) + " expected");
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < tuples; ++t) {
        const std::string where = "channel.transition[" + std::to_string(t) + "]";
        auto row = detail::numbers(tr[t], where);
        if (row.size() != nz) throw FormatError(where + ": has " + std::to_string(row.size()) + " entries, expected " + std::to_string(nz));
        try {
            macres::detail::check_pmf(row);
        } catch (const std::invalid_argument& e) {
            throw FormatError(where + ": " + e.what());
        }
        rows.push_back(std::move(row));
    }
    ChannelSpec spec;
    try {
        spec.channel = MacChannel(sizes, nz, std::move(rows));
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("channel.transition: ") + e.what());
    }
    if (j.contains("input_dists")) {
        const Json& d = j.at("input_dists");
        if (!d.is_array() || d.size() != sizes.size())
            throw FormatError("channel.input_dists: expected one distribution per input");
        for (std::size_t l = 0; l < d.size(); ++l) {
            const std::string where = "channel.input_dists[" + std::to_string(l) + "]";
            auto p = detail::numbers(d[l], where);
            if (p.size() != sizes[l]) throw FormatError(where + ": length does not match the input alphabet");
            try {
                spec.inputs.emplace_back(std::move(p));
            } catch (const std::invalid_argument& e) {
                throw FormatError(where + ": " + e.what());
            }
        }
    } else {
        for (auto s : sizes) spec.inputs.push_back(Dist::uniform(s));
    }
    return spec;
}

inline ChannelSpec load_channel(const std::string& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
    try {
        return channel_from_json(j);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

inline Json channel_to_json(const MacChannel& ch, const std::vector<Dist>& inputs) {
    Json j;
    j["inputs"] = ch.input_sizes();
    j["output"] = ch.output_size();
    j["transition"] = ch.rows();
    Json d = Json::array();
    for (const auto& p : inputs) d.push_back(p.pmf());
    j["input_dists"] = d;
    return j;
}

// ---------------------------------------------------------------------------
// Code descriptor

inline constexpr const char* kDescriptorFormat = "macres-code/1";

inline Json split_to_json(const ratesplit::SplitPoint& sp) {
    Json j;
    j["eps"] = sp.eps;
    j["q"] = sp.q;
    j["a"] = sp.a();
    j["b"] = sp.b();
    j["r1"] = sp.r1;
    j["r_u"] = sp.r_u;
    j["r_v"] = sp.r_v;
    j["discontinuous_corner"] = sp.discontinuous_corner;
    return j;
}

inline Json plan_to_json(const encoder::LengthPlan& p) {
    Json j;
    j["N"] = p.length;
    j["n"] = p.n;
    j["k"] = p.k;
    j["xi"] = p.xi;
    j["delta"] = p.delta;
    j["eps"] = p.eps;
    j["idealized"] = p.idealized;
    j["recycling"] = p.recycling;
    j["asymptotic_only"] = p.asymptotic_only;
    Json streams = Json::array();
    for (const auto& s : p.streams) {
        Json e;
        e["name"] = s.name;
        e["h"] = s.h;
        e["h_cond"] = s.h_cond;
        e["mi"] = s.mi;
        e["hash_len"] = s.hash_len;
        e["fresh_first"] = s.fresh_first;
        e["fresh_rest"] = s.fresh_rest;
        e["width"] = s.width;
        e["clamped"] = s.clamped;
        streams.push_back(e);
    }
    j["streams"] = streams;
    j["users"] = p.users;
    return j;
}

struct DescriptorExtras {
    double beta = polar::kDefaultBeta;
    double delta_override = 0.0;
    std::uint64_t seed = 0;
};

inline Json descriptor_to_json(const encoder::MacCode& code, const DescriptorExtras& ex) {
    Json j;
    j["format"] = kDescriptorFormat;
    j["mode"] = encoder::mode_name(code.mode);
    j["channel"] = channel_to_json(code.channel, code.inputs);
    j["order"] = code.order;
    j["split"] = code.split ? split_to_json(*code.split) : Json(nullptr);
    j["beta"] = ex.beta;
    j["delta_override"] = ex.delta_override;
    j["seed"] = ex.seed;
    j["plan"] = plan_to_json(code.plan);
    Json streams = Json::array();
    for (std::size_t s = 0; s < code.streams.size(); ++s) {
        const auto& sc = code.streams[s];
        Json e;
        e["name"] = code.layout.names[s];
        e["source"] = code.layout.sources[s].pmf();
        e["seed_set"] = sc.code.v_set;
        e["input_width"] = sc.code.input_width;
        e["sampled_indices"] = sc.code.sampled_count();
        e["profile_exact"] = sc.code.profile.exact;
        e["profile_mc_samples"] = sc.code.profile.mc_samples;
        e["cond_entropies"] = sc.code.profile.cond_entropies;
        Json h;
        h["in"] = sc.hash.in_len();
        h["out"] = sc.hash.out_len();
        h["diagonal_hex"] = sc.hash.to_hex();
        e["hash"] = h;
        streams.push_back(e);
    }
    j["streams"] = streams;
    return j;
}

inline std::string descriptor_text(const encoder::MacCode& code, const DescriptorExtras& ex) {
    return descriptor_to_json(code, ex).dump(2) + "\n";
}

struct LoadedCode {
    encoder::MacCode code;
    DescriptorExtras extras;
};

/// Rebuilds the code from a descriptor without resampling or re-profiling.
inline LoadedCode descriptor_from_json(const Json& j) {
    using detail::field;
    if (field(j, "format", "descriptor") != kDescriptorFormat) throw FormatError("descriptor: unsupported format");
    LoadedCode out;
    auto& code = out.code;
    const ChannelSpec ch = channel_from_json(field(j, "channel", "descriptor"));
    code.channel = ch.channel;
    code.inputs = ch.inputs;
    code.mode = encoder::mode_from_name(field(j, "mode", "descriptor").get<std::string>());
    code.order = field(j, "order", "descriptor").get<std::vector<std::size_t>>();
    out.extras.beta = field(j, "beta", "descriptor").get<double>();
    out.extras.delta_override = field(j, "delta_override", "descriptor").get<double>();
    out.extras.seed = field(j, "seed", "descriptor").get<std::uint64_t>();
    const Json& sj = field(j, "split", "descriptor");
    if (!sj.is_null()) {
        if (code.mode != encoder::Mode::Case1) throw FormatError("descriptor.split: only case 1 codes carry a split");
        code.split = ratesplit::split_rates(code.channel, code.inputs[0], field(sj, "q", "descriptor.split").get<double>(),
                                            field(sj, "eps", "descriptor.split").get<double>());
    }
    code.layout = encoder::layout_for(code.mode, code.inputs, code.split, code.order);

    const Json& pj = field(j, "plan", "descriptor");
    encoder::PlanOptions po;
    po.idealized = field(pj, "idealized", "descriptor.plan").get<bool>();
    po.delta_override = out.extras.delta_override;
    po.recycling = field(pj, "recycling", "descriptor.plan").get<bool>();
    code.plan = encoder::make_plan(code.channel, code.layout, code.mode, field(pj, "N", "descriptor.plan").get<std::size_t>(),
                                   field(pj, "k", "descriptor.plan").get<std::size_t>(), field(pj, "xi", "descriptor.plan").get<double>(), po);
    if (plan_to_json(code.plan) != pj) throw FormatError("descriptor.plan: stored lengths disagree with the recomputed plan");

    const Json& streams = field(j, "streams", "descriptor");
    if (!streams.is_array() || streams.size() != code.layout.size()) throw FormatError("descriptor.streams: wrong stream count");
    for (std::size_t s = 0; s < streams.size(); ++s) {
        const std::string where = "descriptor.streams[" + std::to_string(s) + "]";
        const Json& e = streams[s];
        polar::PolarProfile prof;
        prof.n = code.plan.n;
        prof.length = code.plan.length;
        prof.source = code.layout.sources[s];
        prof.beta = out.extras.beta;
        prof.delta_n = polar::delta_for(prof.length, prof.beta);
        prof.cond_entropies = field(e, "cond_entropies", where).get<std::vector<double>>();
        if (prof.cond_entropies.size() != prof.length) throw FormatError(where + ".cond_entropies: wrong length");
        prof.exact = field(e, "profile_exact", where).get<bool>();
        prof.mc_samples = field(e, "profile_mc_samples", where).get<std::size_t>();
        polar::assign_sets(prof);
        const auto width = field(e, "input_width", where).get<std::size_t>();
        if (width != code.plan.streams[s].width) throw FormatError(where + ".input_width: disagrees with the plan");
        encoder::StreamCodec sc;
        try {
            sc.code = polar::make_code_from_seed_set(prof, field(e, "seed_set", where).get<std::vector<std::size_t>>(), width);
        } catch (const std::invalid_argument& err) {
            throw FormatError(where + ".seed_set: " + err.what());
        }
        const Json& h = field(e, "hash", where);
        try {
            sc.hash = hashing::ToeplitzHash::from_hex(field(h, "diagonal_hex", where + ".hash").get<std::string>(),
                                                      field(h, "in", where + ".hash").get<std::size_t>(),
                                                      field(h, "out", where + ".hash").get<std::size_t>());
        } catch (const std::invalid_argument& err) {
            throw FormatError(where + ".hash: " + err.what());
        }
        if (sc.hash.in_len() != code.plan.length || sc.hash.out_len() != code.plan.streams[s].hash_len)
            throw FormatError(where + ".hash: dimensions disagree with the plan");
        code.streams.push_back(std::move(sc));
    }
    return out;
}

inline LoadedCode load_descriptor(const std::string& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
    return descriptor_from_json(j);
}

inline void write_profile_files(const encoder::MacCode& code, const std::string& dir) {
    for (std::size_t s = 0; s < code.streams.size(); ++s) {
        std::ostringstream os;
        polar::write_profile_csv(os, code.streams[s].code.profile);
        write_file(dir + "/profile_" + code.layout.names[s] + ".csv", os.str());
    }
}

/// Hex CSV: block, stream, recycled, fresh, sampled, seq; then block, z.
inline std::string transcript_csv(const encoder::MacCode& code, const encoder::Transcript& tr) {
    auto hex = [](const Bits& b) {
        static constexpr char kDigits[] = "0123456789abcdef";
        std::string s;
        for (std::size_t i = 0; i < b.size(); i += 4) {
            unsigned v = 0;
            for (std::size_t k = 0; k < 4; ++k) v = (v << 1) | (i + k < b.size() ? b[i + k] : 0u);
            s.push_back(kDigits[v]);
        }
        return s;
    };
    std::ostringstream os;
    os << "block,stream,recycled_bits,recycled,fresh_bits,fresh,sampled_bits,sampled,seq\n";
    for (std::size_t i = 0; i < tr.blocks.size(); ++i)
        for (std::size_t s = 0; s < tr.blocks[i].streams.size(); ++s) {
            const auto& b = tr.blocks[i].streams[s];
            os << i + 1 << ',' << code.layout.names[s] << ',' << b.recycled.size() << ',' << hex(b.recycled) << ','
               << b.fresh.size() << ',' << hex(b.fresh) << ',' << b.sampled.size() << ',' << hex(b.sampled) << ','
               << hex(b.seq) << '\n';
        }
    os << "block,z\n";
    for (std::size_t i = 0; i < tr.blocks.size(); ++i) {
        os << i + 1 << ',';
        for (auto z : tr.blocks[i].z) os << z;
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Run report

struct Metric {
    std::string name;
    double value = 0.0;
    std::optional<double> ci_lo;
    std::optional<double> ci_hi;
    std::uint64_t samples = 0;
    std::string mode;  // exact | mc | formula
};

struct RunReport {
    Json meta = Json::object();
    std::vector<Metric> metrics;

    void exact(std::string name, double v) { metrics.push_back({std::move(name), v, std::nullopt, std::nullopt, 0, "exact"}); }
    void formula(std::string name, double v) { metrics.push_back({std::move(name), v, std::nullopt, std::nullopt, 0, "formula"}); }
    void mc(std::string name, const evaluator::Estimate& e) {
        metrics.push_back({std::move(name), e.value, e.ci_lo, e.ci_hi, e.samples, "mc"});
        metrics.push_back({metrics.back().name + ".null_mean", e.null_mean, std::nullopt, std::nullopt, e.samples, "mc"});
        metrics.push_back({metrics[metrics.size() - 2].name + ".null_q99", e.null_q99, std::nullopt, std::nullopt, e.samples, "mc"});
    }

    [[nodiscard]] Json to_json() const {
        Json j = meta;
        Json rows = Json::array();
        for (const auto& m : metrics) {
            Json r;
            r["name"] = m.name;
            r["value"] = std::isfinite(m.value) ? Json(m.value) : Json(nullptr);
            r["ci_lo"] = m.ci_lo ? Json(*m.ci_lo) : Json(nullptr);
            r["ci_hi"] = m.ci_hi ? Json(*m.ci_hi) : Json(nullptr);
            r["samples"] = m.samples;
            r["mode"] = m.mode;
            rows.push_back(r);
        }
        j["metrics"] = rows;
        return j;
    }

    [[nodiscard]] std::string to_csv() const {
        std::ostringstream os;
        os << "name,value,ci_lo,ci_hi,samples,mode\n";
        for (const auto& m : metrics) {
            os << m.name << ',' << fmt_double(m.value) << ',' << (m.ci_lo ? fmt_double(*m.ci_lo) : "") << ','
               << (m.ci_hi ? fmt_double(*m.ci_hi) : "") << ',' << m.samples << ',' << m.mode << '\n';
        }
        return os.str();
    }
};

inline Json region_to_json(const evaluator::RegionSpec& reg) {
    Json j;
    j["users"] = reg.users;
    if (reg.case_tag) {
        j["case"] = encoder::mode_name(*reg.case_tag);
        j["dominant_face_r1"] = {reg.face_lo, reg.face_hi};
    }
    Json cons = Json::array();
    for (const auto& c : reg.constraints) {
        Json e;
        std::vector<std::size_t> users;
        for (std::size_t l = 0; l < reg.users; ++l)
            if (c.mask & (1u << l)) users.push_back(l + 1);
        e["subset"] = users;
        e["bound"] = c.bound;
        cons.push_back(e);
    }
    j["constraints"] = cons;
    Json corners = Json::array();
    for (const auto& c : reg.corners) {
        Json e;
        std::vector<std::size_t> ord;
        for (auto l : c.order) ord.push_back(l + 1);
        e["order"] = ord;
        e["rates"] = c.rates;
        corners.push_back(e);
    }
    j["corners"] = corners;
    const auto sm = evaluator::check_supermodular(reg);
    j["supermodular_violations"] = sm.violations;
    j["corners_valid"] = evaluator::corners_valid(reg);
    return j;
}

inline std::string region_csv(const evaluator::RegionSpec& reg) {
    std::ostringstream os;
    os << "kind,subset_or_order,value\n";
    for (const auto& c : reg.constraints) {
        os << "constraint,";
        bool first = true;
        for (std::size_t l = 0; l < reg.users; ++l)
            if (c.mask & (1u << l)) {
                os << (first ? "" : " ") << l + 1;
                first = false;
            }
        os << ',' << fmt_double(c.bound) << '\n';
    }
    for (const auto& c : reg.corners) {
        std::string ord;
        for (auto l : c.order) ord += (ord.empty() ? "" : " ") + std::to_string(l + 1);
        for (std::size_t l = 0; l < reg.users; ++l) os << "corner_R" << l + 1 << ',' << ord << ',' << fmt_double(c.rates[l]) << '\n';
    }
    if (reg.case_tag) os << "case," << encoder::mode_name(*reg.case_tag) << ",\n";
    return os.str();
}

}  // namespace macres::io
