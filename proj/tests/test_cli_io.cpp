#include <sstream>

#include <gtest/gtest.h>

#include "macres/macres.hpp"

using namespace macres;
using io::Json;

namespace {

const char* kAdder = R"({"inputs": [2, 2], "output": 3, "transition": [[1,0,0],[0,1,0],[0,1,0],[0,0,1]]})";

std::string error_of(const std::string& text) {
    try {
        io::channel_from_json(Json::parse(text));
    } catch (const io::FormatError& e) {
        return e.what();
    }
    return {};
}

experiment::BuildConfig adder_config(std::size_t n_len, std::size_t k, std::uint64_t seed) {
    experiment::BuildConfig c;
    c.spec = io::channel_from_json(Json::parse(kAdder));
    c.length = n_len;
    c.k = k;
    c.seed = seed;
    c.idealized = true;
    return c;
}

}  // namespace

TEST(ChannelFile, LoadsAdderWithUniformInputs) {
    const auto spec = io::channel_from_json(Json::parse(kAdder));
    EXPECT_EQ(spec.channel.num_inputs(), 2u);
    EXPECT_EQ(spec.channel.output_size(), 3u);
    ASSERT_EQ(spec.inputs.size(), 2u);
    EXPECT_DOUBLE_EQ(spec.inputs[1][1], 0.5);
}

TEST(ChannelFile, ErrorsNameTheField) {
    EXPECT_NE(error_of(R"({"inputs": [2, 2], "output": 3, "transition": [[1,0,0],[0,1,0],[0,1,0]]})").find("row 3"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"inputs": [2, 2], "output": 3, "transition": [[1,0,0],[0,1],[0,1,0],[0,0,1]]})")
                  .find("channel.transition[1]"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"inputs": [2, 2], "output": 3, "transition": [[1,0,0],[0,1,0],[0,1,0],[0,0.5,0]]})")
                  .find("channel.transition[3]"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"output": 3, "transition": []})").find("inputs"), std::string::npos);
    EXPECT_NE(error_of(R"({"inputs": [0], "output": 3, "transition": []})").find("channel.inputs[0]"), std::string::npos);
}

TEST(ChannelFile, ParseErrorGivesPosition) {
    const std::string path = ::testing::TempDir() + "macres_bad_channel.json";
    io::write_file(path, "{\n  \"inputs\": [2, 2],\n  \"output\": 3,,\n}\n");
    try {
        io::load_channel(path);
        FAIL() << "expected a format error";
    } catch (const io::FormatError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find(path), std::string::npos);
        EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    }
}

TEST(Descriptor, RoundTripIsByteIdentical) {
    for (std::size_t k : {1u, 3u}) {
        const auto built = experiment::build(adder_config(8, k, 11));
        const std::string text = io::descriptor_text(built.code, built.extras);
        const auto loaded = io::descriptor_from_json(Json::parse(text));
        EXPECT_EQ(io::descriptor_text(loaded.code, loaded.extras), text);
    }
}

TEST(Descriptor, RebuildFromSameSeedIsByteIdentical) {
    const auto a = experiment::build(adder_config(16, 4, 3));
    const auto b = experiment::build(adder_config(16, 4, 3));
    EXPECT_EQ(io::descriptor_text(a.code, a.extras), io::descriptor_text(b.code, b.extras));
    const auto c = experiment::build(adder_config(16, 4, 4));
    EXPECT_NE(io::descriptor_text(a.code, a.extras), io::descriptor_text(c.code, c.extras));
}

TEST(Descriptor, TamperedPlanIsRejected) {
    const auto built = experiment::build(adder_config(8, 2, 1));
    Json j = Json::parse(io::descriptor_text(built.code, built.extras));
    j["plan"]["streams"][0]["hash_len"] = j["plan"]["streams"][0]["hash_len"].get<std::size_t>() + 1;
    EXPECT_THROW(io::descriptor_from_json(j), io::FormatError);
}

TEST(Descriptor, LoadedCodeReplaysTranscript) {
    const auto built = experiment::build(adder_config(8, 3, 5));
    const auto loaded = io::descriptor_from_json(Json::parse(io::descriptor_text(built.code, built.extras)));
    const auto t1 = encoder::simulate_trial(built.code, Rng(42));
    const auto t2 = encoder::simulate_trial(loaded.code, Rng(42));
    EXPECT_EQ(io::transcript_csv(built.code, t1), io::transcript_csv(loaded.code, t2));
    const auto replay = encoder::replay_sequences(loaded.code, t1);
    for (std::size_t s = 0; s < loaded.code.streams.size(); ++s)
        for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(replay[s][i], t1.blocks[i].streams[s].seq);
}

TEST(Report, WorkerCountDoesNotChangeBytes) {
    const auto built = experiment::build(adder_config(8, 3, 2));
    const std::string desc = io::descriptor_text(built.code, built.extras);
    experiment::SimConfig cfg;
    cfg.trials = 2000;
    cfg.seed = 9;
    cfg.mode = experiment::EvalMode::Mc;
    cfg.workers = 1;
    const auto a = experiment::simulate(built.code, desc, cfg);
    cfg.workers = 8;
    const auto b = experiment::simulate(built.code, desc, cfg);
    EXPECT_EQ(a.to_json().dump(2), b.to_json().dump(2));
    EXPECT_EQ(a.to_csv(), b.to_csv());
}

TEST(Report, ExhaustiveRowsCarryNoInterval) {
    const auto built = experiment::build(adder_config(4, 1, 1));
    experiment::SimConfig cfg;
    const auto rep = experiment::simulate(built.code, io::descriptor_text(built.code, built.extras), cfg);
    EXPECT_EQ(rep.meta["evaluation"], "exact");
    bool saw_joint = false;
    for (const auto& m : rep.metrics) {
        EXPECT_FALSE(m.ci_lo.has_value()) << m.name;
        EXPECT_NE(m.mode, "mc");
        saw_joint |= m.name == "tv.joint";
    }
    EXPECT_TRUE(saw_joint);
    std::istringstream csv(rep.to_csv());
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "name,value,ci_lo,ci_hi,samples,mode");
    while (std::getline(csv, line)) EXPECT_NE(line.find(",,,"), std::string::npos) << line;
}

TEST(Report, MonteCarloRowsCarryIntervalAndSamples) {
    const auto built = experiment::build(adder_config(8, 2, 1));
    experiment::SimConfig cfg;
    cfg.trials = 1000;
    cfg.mode = experiment::EvalMode::Mc;
    const auto rep = experiment::simulate(built.code, io::descriptor_text(built.code, built.extras), cfg);
    for (const auto& m : rep.metrics) {
        if (m.mode != "mc" || m.name.find(".null_") != std::string::npos) continue;
        ASSERT_TRUE(m.ci_lo && m.ci_hi) << m.name;
        EXPECT_LE(*m.ci_lo, *m.ci_hi);
        EXPECT_EQ(m.samples, 1000u);
    }
}

TEST(Report, HashesAreEmbedded) {
    const auto built = experiment::build(adder_config(4, 1, 1));
    const std::string desc = io::descriptor_text(built.code, built.extras);
    experiment::SimConfig cfg;
    cfg.seed = 77;
    const auto rep = experiment::simulate(built.code, desc, cfg);
    EXPECT_EQ(rep.meta["descriptor_hash"], io::hex64(io::fnv1a(desc)));
    EXPECT_EQ(rep.meta["config_hash"], io::hex64(io::fnv1a(experiment::config_text(cfg))));
    auto other = cfg;
    other.workers = 8;
    EXPECT_EQ(experiment::config_text(other), experiment::config_text(cfg));
    other.seed = 78;
    EXPECT_NE(experiment::config_text(other), experiment::config_text(cfg));
}

TEST(Report, TooFewTrialsForMonteCarlo) {
    const auto built = experiment::build(adder_config(8, 2, 1));
    experiment::SimConfig cfg;
    cfg.trials = 20;
    cfg.mode = experiment::EvalMode::Mc;
    EXPECT_THROW(experiment::simulate(built.code, "", cfg), experiment::BudgetError);
}

TEST(Build, InfeasibleTarget) {
    auto cfg = adder_config(8, 1, 1);
    cfg.target_r1 = 1.2;
    EXPECT_THROW(experiment::build(cfg), experiment::Infeasible);
}
