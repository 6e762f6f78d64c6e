#include <doctest.h>

#include <httplib.h>

#include <nlohmann/json.hpp>
#include <thread>

#include "slomo/external_backend.hpp"
#include "slomo/io_util.hpp"
#include "slomo/media/image_io.hpp"
#include "slomo/media/y4m.hpp"
#include "slomo/service/jobs.hpp"
#include "slomo/service/server.hpp"
#include "slomo/synthetic.hpp"
#include "test_support.hpp"

using namespace slomo;
using namespace slomo::service;
using nlohmann::json;

namespace {

std::string png_bytes(const Frame& f) {
  const auto b = media::encode_png(f);
  return {b.begin(), b.end()};
}

std::string y4m_bytes(int frames, int w = 32, int h = 24) {
  const auto seq = synthetic::translation_clip(3, w, h, frames, 2, 0);
  const auto b = media::emit_y4m(seq, Chroma::k420);
  return {b.begin(), b.end()};
}

// A live server on an ephemeral port.
class Harness {
 public:
  explicit Harness(ServiceConfig cfg, bool start = true)
      : registry_(interp::BackendRegistry::with_builtins()), manager_(std::move(cfg), registry_), server_(manager_) {
    cfg_port_ = server_.bind();
    thread_ = std::thread([this] { server_.serve(); });
    if (start) manager_.start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", cfg_port_);
    client_->set_read_timeout(30, 0);
  }
  ~Harness() {
    server_.stop();
    thread_.join();
    manager_.stop();
  }

  httplib::Client& http() { return *client_; }
  JobManager& jobs() { return manager_; }

  httplib::Result upload(const std::vector<std::pair<std::string, std::string>>& files, const std::string& e,
                         const std::string& backend = "blend") {
    httplib::MultipartFormDataItems items;
    for (const auto& [name, content] : files) {
      const bool image = name.ends_with(".png");
      items.push_back({"media", content, name, image ? "image/png" : "application/octet-stream"});
    }
    if (!e.empty()) items.push_back({"e", e, "", ""});
    items.push_back({"backend", backend, "", ""});
    return client_->Post("/api/jobs", items);
  }

  json get_json(const std::string& path) {
    auto r = client_->Get(path);
    REQUIRE(r);
    return json::parse(r->body);
  }

  json wait_terminal(const std::string& id) {
    for (int i = 0; i < 600; ++i) {
      const json j = get_json("/api/jobs/" + id);
      if (j["status"] == "done" || j["status"] == "failed") return j;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    FAIL("job did not finish");
    return {};
  }

 private:
  interp::BackendRegistry registry_;
  JobManager manager_;
  Server server_;
  int cfg_port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

ServiceConfig config_in(const test::TempDir& dir) {
  ServiceConfig cfg;
  cfg.data_dir = dir.path();
  cfg.port = 0;
  cfg.workers = 2;
  return cfg;
}

std::string error_code_of(const httplib::Result& r) { return json::parse(r->body)["error"]["code"]; }

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("health and backends") {
    test::TempDir dir;
    Harness h(config_in(dir));
    auto r = h.http().Get("/api/healthz");
    REQUIRE(r);
    CHECK(r->status == 200);
    const json backends = h.get_json("/api/backends");
    std::vector<std::string> names;
    for (const auto& b : backends) names.push_back(b["name"]);
    CHECK(std::find(names.begin(), names.end(), "classical") != names.end());
    CHECK(backends[0].contains("capability"));
  }

  TEST_CASE("image pair at e=3 yields a gallery of 7 frames") {
    test::TempDir dir;
    Harness h(config_in(dir));
    const Frame a = synthetic::texture_frame(1, 448, 256), b = synthetic::texture_frame(1, 448, 256, -8, 0);
    auto r = h.upload({{"a.png", png_bytes(a)}, {"b.png", png_bytes(b)}}, "3", "classical");
    REQUIRE(r);
    REQUIRE(r->status == 201);
    const std::string id = json::parse(r->body)["id"];
    CHECK(id.size() == 22);
    CHECK(r->get_header_value("Location") == "/api/jobs/" + id);

    const json done = h.wait_terminal(id);
    REQUIRE(done["status"] == "done");
    CHECK(done["progress"] == 1.0);
    CHECK(done["result"]["interpolated"] == 7);

    const json frames = h.get_json("/api/jobs/" + id + "/frames");
    REQUIRE(frames["frames"].size() == 7);
    CHECK(frames["count"] == 7);
    for (int k = 1; k <= 7; ++k) {
      CHECK(frames["frames"][k - 1]["k"] == k);
      CHECK(frames["frames"][k - 1]["t"] == k / 8.0);
    }
    CHECK(frames["endpoints"].size() == 2);

    auto png = h.http().Get("/api/jobs/" + id + "/frames/4");
    REQUIRE(png);
    CHECK(png->status == 200);
    CHECK(png->get_header_value("Content-Type") == "image/png");
    const Frame mid = media::decode_image(as_bytes(png->body));
    CHECK(mid.width() == 448);
    auto first = h.http().Get("/api/jobs/" + id + "/frames/0");
    REQUIRE(first);
    CHECK(media::decode_image(as_bytes(first->body)) == a);
    CHECK(h.http().Get("/api/jobs/" + id + "/frames/9")->status == 404);
    CHECK(h.http().Get("/api/jobs/" + id + "/video")->status == 409);
  }

  TEST_CASE("e=1 and e=5 gallery sizes") {
    test::TempDir dir;
    Harness h(config_in(dir));
    const Frame a = Frame::gray(16, 16, 10), b = Frame::gray(16, 16, 20);
    for (auto [e, n] : {std::pair{1, 1}, {5, 31}}) {
      auto r = h.upload({{"a.png", png_bytes(a)}, {"b.png", png_bytes(b)}}, std::to_string(e));
      REQUIRE(r->status == 201);
      const std::string id = json::parse(r->body)["id"];
      REQUIRE(h.wait_terminal(id)["status"] == "done");
      CHECK(h.get_json("/api/jobs/" + id + "/frames")["frames"].size() == static_cast<std::size_t>(n));
    }
  }

  TEST_CASE("upload validation") {
    test::TempDir dir;
    Harness h(config_in(dir));
    const std::string p = png_bytes(Frame::gray(8, 8, 1));
    auto three = h.upload({{"a.png", p}, {"b.png", p}, {"c.png", p}}, "2");
    CHECK(three->status == 400);
    CHECK(json::parse(three->body)["error"]["message"].get<std::string>().find("exactly two images required") !=
          std::string::npos);
    CHECK(h.upload({{"a.png", p}, {"b.png", p}}, "6")->status == 400);
    CHECK(h.upload({{"a.png", p}, {"b.png", p}}, "0")->status == 400);
    CHECK(h.upload({{"a.png", p}, {"b.png", p}}, "two")->status == 400);
    CHECK(h.upload({{"a.png", p}, {"b.png", png_bytes(Frame::gray(9, 8, 1))}}, "2")->status == 400);
    CHECK(h.upload({{"a.png", p}}, "2")->status == 400);
    CHECK(h.upload({}, "2")->status == 400);
    CHECK(h.upload({{"a.png", p}, {"b.png", p}}, "2", "nonexistent")->status == 400);
    auto broken = h.upload({{"a.png", "not a png"}, {"b.png", p}}, "2");
    CHECK(broken->status == 422);
    auto video = h.upload({{"clip.y4m", "YUV4MPEG2 garbage\n"}}, "2");
    CHECK(video->status == 422);
    auto mp4 = h.upload({{"clip.mp4", "opaque"}}, "2");
    CHECK(mp4->status == 503);
    CHECK(error_code_of(mp4) == "configuration");
  }

  TEST_CASE("unknown ids") {
    test::TempDir dir;
    Harness h(config_in(dir));
    auto r = h.http().Get("/api/jobs/AAAAAAAAAAAAAAAAAAAAAA");
    CHECK(r->status == 404);
    CHECK(error_code_of(r) == "not_found");
    CHECK(h.http().Get("/api/jobs/../etc")->status == 404);
  }

  TEST_CASE("video job: y4m result, container fallback, duration") {
    test::TempDir dir;
    Harness h(config_in(dir));
    auto r = h.upload({{"clip.y4m", y4m_bytes(3)}}, "2");
    REQUIRE(r->status == 201);
    const std::string id = json::parse(r->body)["id"];
    const json done = h.wait_terminal(id);
    REQUIRE(done["status"] == "done");
    CHECK(done["result"]["frame_count"] == 9);
    CHECK(done["result"]["fps"] == "30/1");
    CHECK(done["result"]["container"] == false);

    auto v = h.http().Get("/api/jobs/" + id + "/video");
    REQUIRE(v);
    CHECK(v->status == 200);
    CHECK(v->get_header_value("Content-Length") == std::to_string(v->body.size()));
    const auto seq = media::parse_y4m(as_bytes(v->body));
    CHECK(seq.size() == 9);
    CHECK(seq.fps == Rational{30, 1});

    auto c = h.http().Get("/api/jobs/" + id + "/video?format=mp4");
    CHECK(c->status == 503);
    CHECK(error_code_of(c) == "unavailable");
    CHECK(h.http().Get("/api/jobs/" + id + "/frames")->status == 409);
  }

  TEST_CASE("container video through the decoder and encoder") {
    test::TempDir dir;
    write_file_atomic(dir / "decoded.y4m", y4m_bytes(2));
    ServiceConfig cfg = config_in(dir);
    cfg.data_dir = dir / "data";
    cfg.media.decoder_command = "sh -c 'cat \"$0\"' " + (dir / "decoded.y4m").string() + " {input}";
    cfg.media.encoder_command = "sh -c 'cat > \"$0\"' {output}";
    Harness h(cfg);
    auto r = h.upload({{"clip.mp4", "opaque container"}}, "2");
    REQUIRE(r->status == 201);
    const std::string id = json::parse(r->body)["id"];
    const json done = h.wait_terminal(id);
    REQUIRE(done["status"] == "done");
    CHECK(done["result"]["container"] == true);
    auto c = h.http().Get("/api/jobs/" + id + "/video?format=mp4");
    REQUIRE(c->status == 200);
    CHECK(c->get_header_value("Content-Type") == "video/mp4");
    CHECK(media::parse_y4m(as_bytes(c->body)).size() == 5);
  }

  TEST_CASE("unfinished jobs conflict, failures expose no results") {
    test::TempDir dir;
    Harness h(config_in(dir), false);
    const std::string p = png_bytes(Frame::gray(8, 8, 1));
    auto r = h.upload({{"a.png", p}, {"b.png", p}}, "2");
    const std::string id = json::parse(r->body)["id"];
    const json queued = h.get_json("/api/jobs/" + id);
    CHECK(queued["status"] == "queued");
    CHECK(queued["progress"] == 0.0);
    CHECK(h.http().Get("/api/jobs/" + id + "/frames")->status == 409);

    // A job whose backend breaks mid-run.
    test::TempDir dir2;
    ServiceConfig cfg = config_in(dir2);
    interp::BackendRegistry reg = interp::BackendRegistry::with_builtins();
    reg.add(std::make_unique<interp::ExternalBackend>(
        test::tool_path("vfi_loopback").string() + " --mode truncate", 1, "broken", 5000));
    JobManager jm(cfg, reg);
    jm.start();
    CreateJobRequest req;
    req.files = {{"a.png", p}, {"b.png", p}};
    req.backend = "broken";
    const auto rec = jm.create(req);
    REQUIRE(jm.wait_idle(std::chrono::seconds(30)));
    const auto failed = jm.get(rec.spec.id);
    REQUIRE(failed);
    CHECK(failed->state.status == JobStatus::kFailed);
    CHECK(failed->state.error_code == "truncation");
    CHECK_FALSE(std::filesystem::exists(jm.store().result_dir(rec.spec.id)));
    CHECK(job_state_json(*failed).find("\"result\":null") != std::string::npos);
    jm.stop();
  }

  TEST_CASE("restart recovers queued jobs and the janitor purges old ones") {
    test::TempDir dir;
    ServiceConfig cfg = config_in(dir);
    auto reg = interp::BackendRegistry::with_builtins();
    std::string id;
    {
      JobManager jm(cfg, reg);
      CreateJobRequest req;
      const std::string p = png_bytes(Frame::gray(8, 8, 1));
      req.files = {{"a.png", p}, {"b.png", p}};
      req.backend = "blend";
      id = jm.create(req).spec.id;
      CHECK(jm.get(id)->state.status == JobStatus::kQueued);
    }
    JobManager jm(cfg, reg);
    REQUIRE(jm.get(id));
    jm.start();
    REQUIRE(jm.wait_idle(std::chrono::seconds(30)));
    CHECK(jm.get(id)->state.status == JobStatus::kDone);
    CHECK(jm.purge_expired(unix_now()) == 0);
    CHECK(jm.purge_expired(unix_now() + 25 * 3600) == 1);
    CHECK_FALSE(jm.get(id));
    CHECK_FALSE(std::filesystem::exists(jm.store().job_dir(id)));
    jm.stop();
  }

  TEST_CASE("running jobs restart as queued") {
    test::TempDir dir;
    JobStore store(dir.path());
    JobRecord rec;
    rec.spec.id = new_job_id();
    rec.spec.backend = "blend";
    rec.spec.exponent = 1;
    rec.spec.inputs = {"a.png", "b.png"};
    rec.state.status = JobStatus::kRunning;
    rec.state.progress = 0.5;
    rec.state.created_at = unix_now();
    std::filesystem::create_directories(store.input_dir(rec.spec.id));
    media::write_png(store.input_dir(rec.spec.id) / "a.png", Frame::gray(8, 8, 0));
    media::write_png(store.input_dir(rec.spec.id) / "b.png", Frame::gray(8, 8, 100));
    store.save(rec);
    ServiceConfig cfg = config_in(dir);
    auto reg = interp::BackendRegistry::with_builtins();
    JobManager jm(cfg, reg);
    CHECK(jm.get(rec.spec.id)->state.status == JobStatus::kQueued);
    CHECK(jm.get(rec.spec.id)->state.progress == 0.0);
    jm.start();
    REQUIRE(jm.wait_idle(std::chrono::seconds(30)));
    CHECK(jm.get(rec.spec.id)->state.status == JobStatus::kDone);
    jm.stop();
  }

  TEST_CASE("worker limit is respected") {
    test::TempDir dir;
    ServiceConfig cfg = config_in(dir);
    cfg.workers = 1;
    auto reg = interp::BackendRegistry::with_builtins();
    JobManager jm(cfg, reg);
    const std::string p = png_bytes(synthetic::texture_frame(2, 128, 96));
    std::vector<std::string> ids;
    for (int i = 0; i < 3; ++i) {
      CreateJobRequest req;
      req.files = {{"a.png", p}, {"b.png", p}};
      req.exponent = 3;
      ids.push_back(jm.create(req).spec.id);
    }
    jm.start();
    std::size_t max_running = 0;
    std::vector<double> last(ids.size(), 0.0);
    while (!jm.wait_idle(std::chrono::milliseconds(2))) {
      max_running = std::max(max_running, jm.running_count());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const double pr = jm.get(ids[i])->state.progress;
        CHECK(pr >= last[i]);
        last[i] = pr;
      }
    }
    CHECK(max_running <= 1);
    for (const auto& id : ids) CHECK(jm.get(id)->state.status == JobStatus::kDone);
    // FIFO: started in creation order.
    CHECK(*jm.get(ids[0])->state.started_at <= *jm.get(ids[1])->state.started_at);
    CHECK(*jm.get(ids[1])->state.started_at <= *jm.get(ids[2])->state.started_at);
    jm.stop();
  }

  TEST_CASE("upload limit") {
    test::TempDir dir;
    ServiceConfig cfg = config_in(dir);
    cfg.upload_limit = 1024;
    Harness h(cfg);
    const std::string big(4096, 'x');
    auto r = h.upload({{"a.png", big}, {"b.png", big}}, "1");
    REQUIRE(r);
    CHECK(r->status == 413);
  }

  TEST_CASE("job records and ids") {
    for (int i = 0; i < 50; ++i) {
      const auto id = new_job_id();
      CHECK(id.size() == 22);
      CHECK(is_valid_job_id(id));
    }
    CHECK_FALSE(is_valid_job_id("../../etc/passwd"));
    CHECK(new_job_id() != new_job_id());
    JobRecord r;
    r.spec.id = new_job_id();
    r.spec.kind = InputKind::kVideo;
    r.spec.inputs = {"source.y4m"};
    r.state.status = JobStatus::kDone;
    r.state.progress = 1.0;
    r.state.result = JobResult{9, {60, 1}, true};
    r.state.finished_at = 12.5;
    CHECK(parse_job_record(format_job_record(r)) == r);
  }

  TEST_CASE("status mapping") {
    CHECK(http_status(ErrorCode::kValidation) == 400);
    CHECK(http_status(ErrorCode::kNotFound) == 404);
    CHECK(http_status(ErrorCode::kConflict) == 409);
    CHECK(http_status(ErrorCode::kParse) == 422);
    CHECK(http_status(ErrorCode::kProtocol) == 502);
    CHECK(http_status(ErrorCode::kBackendUnavailable) == 503);
  }
}
