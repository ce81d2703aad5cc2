#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "qdren/checkpoint.hpp"
#include "qdren/config_io.hpp"
#include "qdren/synth.hpp"
#include "qdren/training.hpp"

using namespace qdren;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("qdren_unit_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("checkpoints round-trip bit-exactly") {
    ModelConfig c;
    c.dim = 10;
    c.blocks = 4;
    c.input_style = InputStyle::windows;
    c.window = 3;
    SynthSpec spec;
    spec.task = SynthTask::entity_cloze;
    spec.entities = 8;
    spec.n_train = 80;
    spec.n_valid = 30;
    spec.n_test = 10;
    const TaskData data = prepare_task(generate_splits(spec), c);
    TrainOptions o;
    o.patience = 2;
    o.max_epochs = 3;
    o.threads = 1;
    const auto trained = train(c, data, o);

    const fs::path dir = scratch_dir("ckpt");
    save_checkpoint(trained.model, data.vocab, dir / "a");
    const Checkpoint back = load_checkpoint(dir / "a");
    CHECK(back.model.params == trained.model.params);
    CHECK(back.vocab == data.vocab);
    CHECK(back.model.dims.answer_ids == data.dims.answer_ids);
    CHECK(config_to_json(back.model.config) == config_to_json(trained.model.config));
    CHECK(evaluate(back.model, data.valid, 1).accuracy == trained.report.best_val_acc);

    save_checkpoint(back.model, back.vocab, dir / "b");
    // Manifests differ only in the weights file name they point at.
    auto ma = nlohmann::json::parse(slurp(manifest_path(dir / "a")));
    auto mb = nlohmann::json::parse(slurp(manifest_path(dir / "b")));
    CHECK(ma.at("weights") == "a.weights.bin");
    ma.erase("weights");
    mb.erase("weights");
    CHECK(ma.dump() == mb.dump());
    CHECK(slurp(weights_path(dir / "a")) == slurp(weights_path(dir / "b")));
    // The manifest path works as well as the prefix.
    CHECK(load_checkpoint(manifest_path(dir / "a")).model.params == back.model.params);

    // Truncated and padded weight blobs are rejected.
    const std::string blob = slurp(weights_path(dir / "a"));
    {
        std::ofstream w(weights_path(dir / "a"), std::ios::binary | std::ios::trunc);
        w << blob.substr(0, blob.size() - 4);
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "a"), CheckpointError);
    {
        std::ofstream w(weights_path(dir / "a"), std::ios::binary | std::ios::trunc);
        w << blob << "xxxx";
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "a"), CheckpointError);
    {
        std::ofstream m(manifest_path(dir / "b"), std::ios::trunc);
        m << "{ not json";
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "b"), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing"), CheckpointError);
    fs::remove_all(dir);
}

TEST_CASE("config JSON round trip and strict keys") {
    ModelConfig c;
    c.dim = 32;
    c.mode = GateMode::ren;
    c.input_style = InputStyle::windows;
    c.optimizer = OptimizerKind::rmsprop;
    c.lr = 0.01;
    c.seed = 77;
    const auto j = config_to_json(c);
    CHECK(j.at("phi_out") == "sigmoid");
    const ModelConfig back = config_from_json(j);
    CHECK(config_to_json(back) == j);

    auto bad = j;
    bad["learning_rate"] = 0.1;
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = j;
    bad["dim"] = "large";
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = j;
    bad["window"] = 4;
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
}
