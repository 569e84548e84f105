#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "bevcv/benchmark.hpp"
#include "bevcv/formats.hpp"
#include "bevcv/imaging.hpp"
#include "bevcv/index.hpp"
#include "bevcv/manifest.hpp"
#include "cli.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace bevcv;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Three panoramas and aerial tiles with distinct smooth content.
fs::path write_image_manifest(const fs::path& dir) {
  std::vector<ManifestEntry> es;
  for (int i = 0; i < 3; ++i) {
    ImageRaster pano(96, 24), aer(32, 32);
    for (int y = 0; y < pano.height; ++y)
      for (int x = 0; x < pano.width; ++x)
        for (int c = 0; c < 3; ++c)
          pano.at(x, y, c) = static_cast<std::uint8_t>((x * (i + 1) * 3 + y * 5 + c * 60) % 256);
    for (int y = 0; y < aer.height; ++y)
      for (int x = 0; x < aer.width; ++x)
        for (int c = 0; c < 3; ++c)
          aer.at(x, y, c) = static_cast<std::uint8_t>((x * 7 + y * (i + 2) * 4 + c * 90) % 256);
    const std::string p = "pov" + std::to_string(i) + ".ppm";
    const std::string a = "aer" + std::to_string(i) + ".ppm";
    write_ppm(dir / p, pano);
    write_ppm(dir / a, aer);
    es.push_back({static_cast<std::uint64_t>(100 + i), p, a, 40.0 * i, std::nullopt,
                  std::nullopt});
  }
  write_manifest(dir / "m.jsonl", es);
  return dir / "m.jsonl";
}

}  // namespace

TEST(Cli, VersionText) {
  const auto r = invoke({"version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("BEVC embedding format version 1"), std::string::npos);
  EXPECT_NE(r.out.find("BVWT weights format version 1"), std::string::npos);
  EXPECT_NE(r.out.find("\"temperature\""), std::string::npos);
  const auto j = nlohmann::json::parse(invoke({"version", "--json"}).out);
  EXPECT_EQ(j["formats"]["BEVC"], 1);
  EXPECT_EQ(j["formats"]["BVWT"], 1);
  EXPECT_TRUE(j.contains("default_config"));
}

TEST(Cli, ExitCodes) {
  auto r = invoke({"query", "--bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"frobnicate"}).code, 1);
  const auto dir = test::scratch_dir("cli_codes");
  r = invoke({"build-index", "--embeddings", (dir / "missing.bevc").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  std::ofstream(dir / "bad.json") << R"({"loss": {"temperature": -1}})";
  r = invoke({"config", "--config", (dir / "bad.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("temperature"), std::string::npos);
  EXPECT_EQ(invoke({"benchmark", "--k", "0"}).code, 1);
  EXPECT_EQ(invoke({"config", "--out", (dir / "no/such/dir/c.json").string()}).code, 2);
}

TEST(Cli, ConfigEchoRoundTrips) {
  const auto dir = test::scratch_dir("cli_config");
  auto r = invoke({"config", "--fov", "90", "--out", (dir / "c.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  r = invoke({"config", "--config", (dir / "c.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, slurp(dir / "c.json"));
  EXPECT_NE(r.out.find("\"fov_deg\": 90"), std::string::npos);
}

TEST(Cli, EvaluateThreeItems) {
  const auto dir = test::scratch_dir("cli_eval");
  EmbeddingSet s;
  s.dim = 3;
  s.append(1, std::vector<float>{1, 0, 0});
  s.append(2, std::vector<float>{0, 1, 0});
  s.append(3, std::vector<float>{0, 0, 1});
  write_embeddings(dir / "g.bevc", s);
  auto r = invoke({"evaluate", "--index", (dir / "g.bevc").string(), "--queries",
                (dir / "g.bevc").string(), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["r1"], 100.0);
  EXPECT_EQ(j["r10"], 100.0);

  std::ofstream(dir / "truth.csv") << "query_id,truth_id\n1,2\n2,1\n3,3\n";
  r = invoke({"evaluate", "--index", (dir / "g.bevc").string(), "--queries",
           (dir / "g.bevc").string(), "--truth", (dir / "truth.csv").string(), "--csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("3,3,1,33.3"), std::string::npos) << r.out;
  std::ofstream(dir / "short.csv") << "1,1\n";
  r = invoke({"evaluate", "--index", (dir / "g.bevc").string(), "--queries",
           (dir / "g.bevc").string(), "--truth", (dir / "short.csv").string()});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, QueryMatchesBruteForce) {
  const auto dir = test::scratch_dir("cli_query");
  Rng rng(1);
  write_embeddings(dir / "g.bevc", random_unit_set(400, 16, rng));
  write_embeddings(dir / "q.bevc", random_unit_set(25, 16, rng));
  const auto idx = dir / "idx.bevc";
  auto r = invoke({"build-index", "--embeddings", (dir / "g.bevc").string(), "--out",
                idx.string(), "--leaf-size", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::vector<std::string> base{"query", "--index", idx.string(), "--queries",
                                      (dir / "q.bevc").string(), "--k", "5"};
  const auto tree = invoke(base);
  auto args = base;
  args.push_back("--brute-force");
  const auto brute = invoke(args);
  ASSERT_EQ(tree.code, 0) << tree.err;
  EXPECT_EQ(tree.out, brute.out);
  EXPECT_EQ(tree.out.substr(0, 27), "query_id,rank,id,similarity");
  EXPECT_EQ(std::count(tree.out.begin(), tree.out.end(), '\n'), 1 + 25 * 5);
}

TEST(Cli, BuildIndexRejectsNonUnitRows) {
  const auto dir = test::scratch_dir("cli_norm");
  EmbeddingSet s;
  s.dim = 2;
  s.append(1, std::vector<float>{3, 4});
  write_embeddings(dir / "e.bevc", s);
  EXPECT_EQ(invoke({"build-index", "--embeddings", (dir / "e.bevc").string()}).code, 1);
  const auto r = invoke({"build-index", "--embeddings", (dir / "e.bevc").string(),
                      "--normalize", "--out", (dir / "n.bevc").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(read_embeddings(dir / "n.bevc").values[0], 0.6f, 1e-7);
}

TEST(Cli, CropWritesCentredCrops) {
  const auto dir = test::scratch_dir("cli_crop");
  const auto m = write_image_manifest(dir);
  const auto r = invoke({"crop", "--manifest", m.string(), "--out", (dir / "crops").string(),
                      "--fov", "90"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto c = load_image(dir / "crops" / "101.ppm");
  EXPECT_EQ(c.width, 24);
  EXPECT_EQ(c.height, 24);
  EXPECT_EQ(c, fov_crop(load_image(dir / "pov1.ppm"), {90.0, 40.0}));
}

TEST(Cli, OutputsAreByteIdenticalAcrossRuns) {
  const auto dir = test::scratch_dir("cli_determinism");
  const auto m = write_image_manifest(dir).string();
  std::ofstream(dir / "cfg.json") << R"({"trainer": {"epochs": 3, "batch_size": 4}})";
  const auto cfg = (dir / "cfg.json").string();
  for (int run = 0; run < 2; ++run) {
    const auto d = dir / std::to_string(run);
    fs::create_directories(d);
    const auto p = [&](const char* name) { return (d / name).string(); };
    const std::vector<std::vector<std::string>> steps{
        {"init-weights", "--seed", "5", "--out", p("w.bvwt")},
        {"embed", "--manifest", m, "--weights", p("w.bvwt"), "--branch", "pov", "--out",
         p("pov.bevc"), "--jobs", run == 0 ? "1" : "2"},
        {"embed", "--manifest", m, "--weights", p("w.bvwt"), "--branch", "aerial", "--out",
         p("aer.bevc")},
        {"query", "--index", p("aer.bevc"), "--queries", p("pov.bevc"), "--k", "3", "--out",
         p("q.csv")},
        {"evaluate", "--index", p("aer.bevc"), "--queries", p("pov.bevc"), "--json", "--out",
         p("eval.json")},
        {"synth-features", "--seed", "1", "--scene-seed", "2", "--items", "12", "--out", p("feat.bvwt")},
        {"train-head", "--features", p("feat.bvwt"), "--seed", "3", "--config", cfg, "--out",
         p("head.bvwt"), "--loss-csv", p("loss.csv")},
        {"sweep-offset", "--weights", p("head.bvwt"), "--synthetic", "12", "--offsets",
         "0,10,30", "--seed", "1", "--out", p("sweep.csv")},
        {"report-complexity", "--csv", "--out", p("complexity.csv")},
    };
    for (const auto& s : steps) {
      const auto r = invoke(s);
      ASSERT_EQ(r.code, 0) << s[0] << ": " << r.err;
    }
  }
  for (const char* f : {"w.bvwt", "pov.bevc", "aer.bevc", "q.csv", "eval.json", "feat.bvwt",
                        "head.bvwt", "loss.csv", "sweep.csv", "complexity.csv"}) {
    const auto a = slurp(dir / "0" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(dir / "1" / f)) << f;
  }
}
