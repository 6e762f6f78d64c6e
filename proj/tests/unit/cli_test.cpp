#include <doctest.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "cli/cli.hpp"
#include "slomo/dataset.hpp"
#include "slomo/io_util.hpp"
#include "slomo/media/frame_dir.hpp"
#include "slomo/media/y4m.hpp"
#include "slomo/synthetic.hpp"
#include "test_support.hpp"

using namespace slomo;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args, std::map<std::string, std::string> env = {}) {
  args.insert(args.begin(), "slomo");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err,
                            [env](const char* name) -> std::optional<std::string> {
                              const auto it = env.find(name);
                              if (it == env.end()) return std::nullopt;
                              return it->second;
                            });
  return {code, out.str(), err.str()};
}

void write_y4m(const std::filesystem::path& path, int frames) {
  media::write_y4m_file(path, synthetic::translation_clip(4, 32, 24, frames, 2, 0), Chroma::k420);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("slomo writes (n-1) 2^e + 1 frames") {
    test::TempDir dir;
    write_y4m(dir / "in.y4m", 2);
    const auto r = run_cli({"slomo", (dir / "in.y4m").string(), "-o", (dir / "out.y4m").string(), "-e", "2",
                            "--backend", "blend"});
    CHECK(r.code == 0);
    CHECK(r.out.find("output_frames=5") != std::string::npos);
    const auto out = media::read_y4m_file(dir / "out.y4m");
    CHECK(out.size() == 5);
  }

  TEST_CASE("slomo to a frame directory") {
    test::TempDir dir;
    write_y4m(dir / "in.y4m", 3);
    const auto r = run_cli({"slomo", (dir / "in.y4m").string(), "-o", (dir / "frames").string(), "-e", "1"});
    CHECK(r.code == 0);
    CHECK(media::read_frame_dir(dir / "frames").size() == 5);
  }

  TEST_CASE("exit codes") {
    test::TempDir dir;
    write_y4m(dir / "in.y4m", 2);
    const auto bad_e = run_cli({"slomo", (dir / "in.y4m").string(), "-o", (dir / "o.y4m").string(), "-e", "0"});
    CHECK(bad_e.code == cli::kExitUsage);
    CHECK(bad_e.err.rfind("slomo: error: validation: ", 0) == 0);
    CHECK(run_cli({"slomo", (dir / "missing.y4m").string(), "-o", (dir / "o.y4m").string()}).code == cli::kExitIo);
    write_file_atomic(dir / "bad.y4m", std::string("YUV4MPEG2 W2 H2 F30:1\nFRAME\nxx"));
    CHECK(run_cli({"slomo", (dir / "bad.y4m").string(), "-o", (dir / "o.y4m").string()}).code == cli::kExitMedia);
    write_file_atomic(dir / "in.mp4", std::string("opaque"));
    CHECK(run_cli({"slomo", (dir / "in.mp4").string(), "-o", (dir / "o.y4m").string()}).code == cli::kExitConfig);
    CHECK(run_cli({"frobnicate"}).code == cli::kExitUsage);
    CHECK(run_cli({"slomo"}).code == cli::kExitUsage);
    CHECK(run_cli({"slomo", (dir / "in.y4m").string(), "-o", (dir / "o.y4m").string(), "-b", "external",
                   "--backend-cmd", test::tool_path("vfi_loopback").string() + " --mode bad-magic"})
              .code == cli::kExitBackend);
  }

  TEST_CASE("exit code table") {
    CHECK(cli::exit_code_for(ErrorCode::kValidation) == 2);
    CHECK(cli::exit_code_for(ErrorCode::kNotFound) == 3);
    CHECK(cli::exit_code_for(ErrorCode::kTruncation) == 4);
    CHECK(cli::exit_code_for(ErrorCode::kContractViolation) == 5);
    CHECK(cli::exit_code_for(ErrorCode::kConfiguration) == 6);
    CHECK(cli::exit_code_for(ErrorCode::kInternal) == 1);
  }

  TEST_CASE("binary pipes y4m to stdout without diagnostics mixed in") {
    test::TempDir dir;
    write_y4m(dir / "in.y4m", 2);
    const auto r = test::run_tool({test::tool_path("slomo").string(), "slomo", (dir / "in.y4m").string(), "-o", "-",
                                   "-e", "1", "-b", "blend"});
    CHECK(r.status == 0);
    const auto seq = media::parse_y4m(as_bytes(r.out));
    CHECK(seq.size() == 3);
    CHECK(r.err.find("output_frames=3") != std::string::npos);

    const auto bad = test::run_tool({test::tool_path("slomo").string(), "slomo", (dir / "nope.y4m").string(), "-o", "-"});
    CHECK(bad.status == 3);
    CHECK(bad.out.empty());
    CHECK(bad.err.rfind("slomo: error: io: ", 0) == 0);
  }

  TEST_CASE("dataset writes deterministic split files") {
    test::TempDir dir;
    test::write_translation_corpus(dir / "corpus", 10, 4, 16, 16, 1, 0);
    media::write_frame_dir(dir / "corpus" / "short", synthetic::translation_clip(1, 16, 16, 2, 1, 0));
    for (const char* out : {"a", "b"}) {
      const auto r = run_cli({"dataset", (dir / "corpus").string(), "-o", (dir / out).string(), "--seed", "5"});
      REQUIRE(r.code == 0);
    }
    for (const char* f : {"corpus.json", "splits.json", "triplets.json"}) {
      CHECK(read_text_file(dir / "a" / f) == read_text_file(dir / "b" / f));
    }
    const auto split = dataset::parse_split_file(read_text_file(dir / "a" / "splits.json"));
    CHECK(split.assignments.size() == 11);
    CHECK(split.clips_in(dataset::Split::kVal).size() == 1);
    const auto index = dataset::parse_triplet_index(read_text_file(dir / "a" / "triplets.json"));
    REQUIRE(index.warnings.size() == 1);
    CHECK(index.warnings[0].find("short") != std::string::npos);
    CHECK(index.entries.size() == 20);
  }

  TEST_CASE("dataset augmentation export") {
    test::TempDir dir;
    test::write_translation_corpus(dir / "corpus", 3, 4, 40, 30, 1, 0);
    const auto r = run_cli({"dataset", (dir / "corpus").string(), "-o", (dir / "out").string(), "--augment", "--crop",
                            "32x16", "--ratios", "1,0,0"});
    REQUIRE(r.code == 0);
    std::istringstream lines(read_text_file(dir / "out" / "augmentations.jsonl"));
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
      const json j = json::parse(line);
      CHECK(j["crop"]["w"] == 32);
      CHECK(j["crop"]["x"].get<int>() <= 8);
      ++n;
    }
    CHECK(n == 6);
  }

  TEST_CASE("eval is deterministic and ranks backends") {
    test::TempDir dir;
    test::write_translation_corpus(dir / "corpus", 10, 5, 64, 48, 4, 0);
    auto eval = [&](const std::string& out) {
      return run_cli({"eval", "--corpus", (dir / "corpus").string(), "--split", (dir / "split.json").string(), "--seed",
                      "3", "-b", "classical", "-b", "blend", "-b", "oracle", "--format", "json", "-o",
                      (dir / out).string()});
    };
    REQUIRE(eval("r1.json").code == 0);
    CHECK(std::filesystem::exists(dir / "split.json"));
    REQUIRE(eval("r2.json").code == 0);
    CHECK(read_text_file(dir / "r1.json") == read_text_file(dir / "r2.json"));
    const json reports = json::parse(read_text_file(dir / "r1.json"));
    REQUIRE(reports.size() == 3);
    CHECK(reports[0]["psnr_mean"].get<double>() > reports[1]["psnr_mean"].get<double>());
    CHECK(reports[2]["ssim_mean"] == 1.0);
    CHECK(reports[0]["frames"] == 3);

    const auto md = run_cli({"eval", "--corpus", (dir / "corpus").string(), "--split", (dir / "split.json").string(),
                             "-b", "oracle", "--format", "markdown"});
    CHECK(md.code == 0);
    CHECK(md.out.find("| oracle | 100.0 | 1.000 |") != std::string::npos);
  }

  TEST_CASE("bench prints a table") {
    const auto r = run_cli({"bench", "-b", "blend", "--resolution", "64x32", "--frames", "2", "--repeats", "2"});
    CHECK(r.code == 0);
    CHECK(r.out.find("64x32") != std::string::npos);
    CHECK(run_cli({"bench", "--resolution", "64by32"}).code == cli::kExitUsage);
  }

  TEST_CASE("settings precedence: defaults < config < flags < env") {
    cli::Settings s;
    CHECK(s.exponent == 2);
    cli::apply_config_text(s, "[interp]\nexponent = 3\nworkers = 2\n[backend]\nname = blend\n");
    CHECK(s.exponent == 3);
    CHECK(s.workers == 2);
    CHECK(s.backend.name == "blend");
    cli::apply_environment(s, [](const char* n) -> std::optional<std::string> {
      if (std::string(n) == "SLOMO_WORKERS") return "7";
      return std::nullopt;
    });
    CHECK(s.workers == 7);
    CHECK_THROWS_AS(cli::apply_config_text(s, "[interp]\nbogus = 1\n"), Error);
    CHECK_THROWS_AS(cli::apply_config_text(s, "[nowhere]\nx = 1\n"), Error);

    test::TempDir dir;
    write_y4m(dir / "in.y4m", 2);
    write_file_atomic(dir / "cfg.ini", std::string("[interp]\nexponent = 1\n[backend]\nname = blend\n"));
    const auto from_config = run_cli({"slomo", (dir / "in.y4m").string(), "-o", (dir / "a.y4m").string(), "--config",
                                      (dir / "cfg.ini").string()});
    CHECK(from_config.out.find("output_frames=3") != std::string::npos);
    CHECK(from_config.out.find("backend=blend") != std::string::npos);
    const auto flag_wins = run_cli({"slomo", (dir / "in.y4m").string(), "-o", (dir / "b.y4m").string(), "--config",
                                    (dir / "cfg.ini").string(), "-e", "2"});
    CHECK(flag_wins.out.find("output_frames=5") != std::string::npos);
    write_file_atomic(dir / "cfg2.ini", std::string("[backend]\nname = classical\n"));
    const auto env_wins = run_cli({"slomo", (dir / "in.y4m").string(), "-o", (dir / "c.y4m").string(), "--config",
                                   (dir / "cfg2.ini").string(), "-e", "1", "-b", "classical"},
                                  {{"SLOMO_BACKEND", "blend"}});
    CHECK(env_wins.code == 0);
    CHECK(env_wins.out.find("backend=blend") != std::string::npos);
  }
}
