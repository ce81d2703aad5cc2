#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "qdren/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = qdren::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

/// Value following `key ` on the line that starts with it.
std::string field(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(key + " ", 0) == 0) {
            std::istringstream rest(line.substr(key.size() + 1));
            std::string v;
            rest >> v;
            return v;
        }
    }
    return {};
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("qdren_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("gen is deterministic and refuses to overwrite") {
    const fs::path dir = scratch_dir("gen");
    const std::string a = (dir / "a").string(), b = (dir / "b").string();
    REQUIRE(cli({"gen", "--task", "single-fact", "--n", "50", "--seed", "4", "--out", a}).code == 0);
    REQUIRE(cli({"gen", "--task", "single-fact", "--n", "50", "--seed", "4", "--out", b}).code == 0);
    for (auto f : {"train.txt", "valid.txt", "test.txt"}) CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    CHECK(slurp(dir / "a" / "train.txt").rfind("# generator", 0) == 0);

    const auto again = cli({"gen", "--task", "single-fact", "--n", "50", "--out", a});
    CHECK(again.code == 1);
    CHECK(again.err.find("--force") != std::string::npos);
    CHECK(cli({"gen", "--task", "single-fact", "--n", "50", "--out", a, "--force"}).code == 0);

    const std::string c = (dir / "c").string();
    REQUIRE(cli({"gen", "--task", "entity-cloze", "--n", "20", "--out", c}).code == 0);
    CHECK(slurp(dir / "c" / "train.txt").find("CANDIDATES\t") != std::string::npos);

    CHECK(cli({"gen", "--task", "cnn", "--out", (dir / "d").string()}).code == 2);
    CHECK(cli({"gen", "--task", "entity-cloze", "--window", "4", "--out", (dir / "d").string()}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    fs::remove_all(dir);
}

TEST_CASE("train, eval and gates") {
    const fs::path dir = scratch_dir("train");
    const std::string data = (dir / "data").string();
    REQUIRE(cli({"gen", "--task", "single-fact", "--n", "100", "--seed", "3", "--out", data}).code == 0);
    const std::vector<std::string> train_args{"train",      "--data",       data,  "--dim", "10", "--blocks", "4",
                                              "--patience", "2",            "--max-epochs", "6",  "--threads", "1"};
    auto with_out = [&](const std::string& name) {
        auto args = train_args;
        args.push_back("--out");
        args.push_back((dir / name).string());
        return args;
    };
    const auto t1 = cli(with_out("r1"));
    REQUIRE_MESSAGE(t1.code == 0, t1.err);
    REQUIRE(cli(with_out("r2")).code == 0);
    CHECK(slurp(dir / "r1" / "report.csv") == slurp(dir / "r2" / "report.csv"));
    CHECK(slurp(dir / "r1" / "model.weights.bin") == slurp(dir / "r2" / "model.weights.bin"));
    CHECK(fs::exists(dir / "r1" / "resolved_config.json"));

    const std::string ckpt = (dir / "r1" / "model").string();
    const auto ev = cli({"eval", "--checkpoint", ckpt, "--data", data, "--split", "valid", "--threads", "1"});
    REQUIRE(ev.code == 0);
    const std::size_t best = t1.out.find("best epoch");
    REQUIRE(best != std::string::npos);
    const std::string best_acc = field(t1.out.substr(t1.out.find("val_acc", best)), "val_acc");
    CHECK(std::stod(field(ev.out, "accuracy")) == doctest::Approx(std::stod(best_acc)).epsilon(1e-6));
    CHECK(std::stod(field(ev.out, "accuracy")) + std::stod(field(ev.out, "error")) == doctest::Approx(1.0));

    const auto gates = cli({"gates", "--checkpoint", ckpt, "--data", data, "--split", "test", "--story", "0"});
    REQUIRE(gates.code == 0);
    // 4 blocks x 6 sentences plus a header.
    CHECK(count_lines(gates.out) == 4 * 6 + 1);
    CHECK(gates.out.rfind("block,step,sentence,gate\n", 0) == 0);

    CHECK(cli({"eval", "--checkpoint", (dir / "nope").string(), "--data", data}).code == 1);
    CHECK(cli({"eval", "--data", data}).code == 2);

    // A dataset whose answers the checkpoint has never seen.
    const std::string other = (dir / "other").string();
    REQUIRE(cli({"gen", "--task", "single-fact", "--n", "20", "--locations", "9", "--out", other}).code == 0);
    const auto mismatch = cli({"eval", "--checkpoint", ckpt, "--data", other});
    CHECK(mismatch.code == 1);
    CHECK(mismatch.err.find("vocabulary mismatch") != std::string::npos);

    {
        std::ofstream cfg(dir / "bad.json");
        cfg << R"({"dim": 10, "learning_rate": 0.1})";
    }
    const auto bad = cli({"train", "--data", data, "--config", (dir / "bad.json").string(), "--out",
                          (dir / "r3").string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("learning_rate") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("gradcheck exit codes") {
    CHECK(cli({"gradcheck", "--mode", "qdren", "--style", "sentences", "--phi", "prelu"}).code == 0);
    const auto broken = cli({"gradcheck", "--mode", "qdren", "--style", "sentences", "--phi", "prelu", "--inject-error"});
    CHECK(broken.code == 3);
    CHECK(cli({"gradcheck", "--dim", "16"}).code == 2);
    CHECK(cli({"gradcheck", "--phi", "tanh"}).code == 2);
}
