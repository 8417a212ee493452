#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gwnet/cli.hpp"

using namespace gwnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("gwnet_cli_" + tag + "_" +
                                            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// synth -> preprocess, shared by the train tests.
std::string make_clips(const TempDir& tmp, std::size_t per_class) {
    std::ostringstream out, err;
    cli::SynthOptions sy;
    sy.out_dir = tmp.sub("raw");
    sy.clips_per_class = per_class;
    REQUIRE(cli::run_synth(sy, out, err) == cli::kExitOk);

    cli::PreprocessOptions pre;
    pre.manifest = tmp.sub("raw") + "/manifest.tsv";
    pre.out_dir = tmp.sub("clips");
    pre.target_h = 12;
    pre.target_w = 12;
    REQUIRE(cli::run_preprocess(pre, out, err) == cli::kExitOk);
    REQUIRE(out.str().find("-> 12x12x20") != std::string::npos);
    return tmp.sub("clips") + "/manifest.tsv";
}

cli::TrainOptions small_train(const std::string& manifest, const std::string& out_dir) {
    cli::TrainOptions tr;
    tr.manifest = manifest;
    tr.preset = "synth";
    tr.out_dir = out_dir;
    tr.folds = 2;
    tr.epochs = 2;
    tr.lstm_epochs = 2;
    tr.batch_size = 4;
    tr.lr = 1e-3;
    tr.dropout = 0.1;
    tr.lstm_cells = 8;
    tr.seed = 404;
    return tr;
}

}  // namespace

TEST_CASE("preprocess pipeline on synthetic raw frames", "[cli]") {
    TempDir tmp("pre");
    const std::string manifest = make_clips(tmp, 2);
    const DatasetManifest m = load_manifest(manifest);
    REQUIRE(m.entries.size() == 4);
    const ClipVolume<float> clip = read_clip(m.entries[0].path);
    CHECK(clip.voxels.shape() == Shape{12, 12, 20});
    for (std::size_t i = 0; i < clip.voxels.size(); ++i) {
        CHECK(clip.voxels[i] >= 0.0f);
        CHECK(clip.voxels[i] <= 1.0f);
    }
}

TEST_CASE("preprocess output is byte-deterministic", "[cli]") {
    TempDir tmp("predet");
    std::ostringstream out, err;
    cli::SynthOptions sy;
    sy.out_dir = tmp.sub("raw");
    sy.clips_per_class = 1;
    REQUIRE(cli::run_synth(sy, out, err) == cli::kExitOk);
    cli::PreprocessOptions pre;
    pre.manifest = tmp.sub("raw") + "/manifest.tsv";
    pre.target_h = 12;
    pre.target_w = 12;
    pre.out_dir = tmp.sub("a");
    REQUIRE(cli::run_preprocess(pre, out, err) == cli::kExitOk);
    pre.out_dir = tmp.sub("b");
    REQUIRE(cli::run_preprocess(pre, out, err) == cli::kExitOk);
    for (const auto& entry : fs::directory_iterator(tmp.sub("a"))) {
        const std::string name = entry.path().filename().string();
        if (entry.path().extension() != ".clip") continue;
        CHECK(slurp(tmp.sub("a") + "/" + name) == slurp(tmp.sub("b") + "/" + name));
    }
}

TEST_CASE("preprocess names the failing entry", "[cli]") {
    TempDir tmp("missing");
    const std::string manifest = tmp.sub("manifest.tsv");
    std::ofstream(manifest) << tmp.sub("not-there") << "\twalking\ts1\n";
    std::ostringstream out, err;
    cli::PreprocessOptions pre;
    pre.manifest = manifest;
    pre.out_dir = tmp.sub("clips");
    CHECK(cli::run_preprocess(pre, out, err) == cli::kExitIo);
    CHECK(err.str().find("not-there") != std::string::npos);
}

TEST_CASE("train is byte-deterministic given a seed", "[cli]") {
    TempDir tmp("det");
    const std::string manifest = make_clips(tmp, 2);

    std::ostringstream out1, out2, err;
    REQUIRE(cli::run_train(small_train(manifest, tmp.sub("run1")), out1, err) == cli::kExitOk);
    REQUIRE(cli::run_train(small_train(manifest, tmp.sub("run2")), out2, err) == cli::kExitOk);

    CHECK(out1.str() == out2.str());
    for (const std::string name :
         {"fold0_metrics.tsv", "fold1_metrics.tsv", "fold0.ckpt", "fold1.ckpt", "summary.tsv"}) {
        const std::string a = slurp(tmp.sub("run1") + "/" + name);
        const std::string b = slurp(tmp.sub("run2") + "/" + name);
        REQUIRE_FALSE(a.empty());
        CHECK(a == b);
    }
    // The summary's final stdout line reports mean and deviation.
    CHECK(out1.str().find("accuracy ") != std::string::npos);
    CHECK(out1.str().find("\xc2\xb1") != std::string::npos);
}

TEST_CASE("fine-tuning through the CLI keeps frozen layers", "[cli]") {
    TempDir tmp("ft");
    const std::string manifest = make_clips(tmp, 2);
    std::ostringstream out, err;
    REQUIRE(cli::run_train(small_train(manifest, tmp.sub("base")), out, err) == cli::kExitOk);

    cli::TrainOptions ft = small_train(manifest, tmp.sub("tuned"));
    ft.fine_tune_from = tmp.sub("base") + "/fold0.ckpt";
    ft.trainable = "Conv4,FC1";
    ft.folds = 2;
    REQUIRE(cli::run_train(ft, out, err) == cli::kExitOk);

    const LoadedArtifacts base = load_checkpoint(tmp.sub("base") + "/fold0.ckpt");
    const LoadedArtifacts tuned = load_checkpoint(tmp.sub("tuned") + "/fold0.ckpt");
    for (const std::string frozen : {"Conv1", "Conv2", "Conv3"})
        for (std::size_t li = 0; li < base.model.spec.layers.size(); ++li)
            if (base.model.spec.layers[li].name == frozen)
                CHECK(base.model.weights[li].values() == tuned.model.weights[li].values());
}

TEST_CASE("verify command", "[cli]") {
    std::ostringstream out, err;
    SECTION("params suite passes") {
        CHECK(cli::run_verify({"params"}, out, err) == cli::kExitOk);
        CHECK(out.str().find("PASS params.kth.total: measured 1437712") != std::string::npos);
    }
    SECTION("sampler suite passes") {
        CHECK(cli::run_verify({"sampler"}, out, err) == cli::kExitOk);
    }
    SECTION("shapes suite passes") {
        CHECK(cli::run_verify({"shapes"}, out, err) == cli::kExitOk);
    }
    SECTION("unknown suite is a config error") {
        CHECK(cli::run_verify({"bogus"}, out, err) == cli::kExitConfig);
    }
}

TEST_CASE("sweep command", "[cli]") {
    TempDir tmp("sweep");
    std::ostringstream out, err;

    SECTION("parameter validation") {
        cli::SweepOptions sw;
        sw.param = "kernel-size";
        sw.manifest = tmp.sub("whatever.tsv");
        CHECK(cli::run_sweep(sw, out, err) == cli::kExitConfig);
        sw.param = "window-size";
        sw.range = "8..3";
        CHECK(cli::run_sweep(sw, out, err) == cli::kExitConfig);
    }
    SECTION("missing manifest yields no partial output") {
        cli::SweepOptions sw;
        sw.param = "layers";
        sw.manifest = tmp.sub("absent.tsv");
        sw.out_file = tmp.sub("table.tsv");
        CHECK(cli::run_sweep(sw, out, err) == cli::kExitIo);
        CHECK_FALSE(fs::exists(tmp.sub("table.tsv")));
    }
    SECTION("layers sweep over the synthetic clips") {
        const std::string manifest = make_clips(tmp, 2);
        cli::SweepOptions sw;
        sw.param = "layers";
        sw.range = "5..6";
        sw.manifest = manifest;
        sw.preset = "synth";
        sw.epochs = 1;
        sw.lstm_epochs = 1;
        sw.folds = 2;
        sw.batch_size = 4;
        sw.dropout = 0.1;
        sw.lstm_cells = 8;
        sw.out_file = tmp.sub("layers.tsv");
        REQUIRE(cli::run_sweep(sw, out, err) == cli::kExitOk);
        const std::string table = slurp(tmp.sub("layers.tsv"));
        CHECK(table.find("setting\tmean_acc\tstd_acc\n") == 0);
        CHECK(table.find("\n5\t") != std::string::npos);
        CHECK(table.find("\n6\t") != std::string::npos);
    }
    SECTION("window-size sweep re-preprocesses raw frames") {
        cli::SynthOptions sy;
        sy.out_dir = tmp.sub("raw");
        sy.clips_per_class = 2;
        REQUIRE(cli::run_synth(sy, out, err) == cli::kExitOk);
        cli::SweepOptions sw;
        sw.param = "window-size";
        sw.range = "4..5";
        sw.manifest = tmp.sub("raw") + "/manifest.tsv";
        sw.preset = "synth";
        sw.epochs = 1;
        sw.lstm_epochs = 1;
        sw.folds = 2;
        sw.batch_size = 4;
        sw.dropout = 0.1;
        sw.lstm_cells = 8;
        REQUIRE(cli::run_sweep(sw, out, err) == cli::kExitOk);
        std::size_t rows = 0;
        std::istringstream table(out.str());
        std::string line;
        while (std::getline(table, line))
            if (!line.empty() && (line[0] == '4' || line[0] == '5')) ++rows;
        CHECK(rows == 2);
    }
}

TEST_CASE("installed binary smoke test", "[cli]") {
#ifdef GWNET_CLI_BIN
    const std::string bin = GWNET_CLI_BIN;
    SECTION("verify exits zero") {
        const int rc = std::system((bin + " verify --suite params > /dev/null 2>&1").c_str());
        CHECK(rc != -1);
        CHECK(WEXITSTATUS(rc) == 0);
    }
    SECTION("bad flags exit with the config code") {
        const int rc = std::system((bin + " train > /dev/null 2>&1").c_str());
        CHECK(rc != -1);
        CHECK(WEXITSTATUS(rc) == cli::kExitConfig);
    }
#endif
}
