#include "slomo/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <nlohmann/json.hpp>
#include <set>

#include "slomo/error.hpp"
#include "slomo/io_util.hpp"
#include "slomo/media/frame_dir.hpp"

namespace slomo::dataset {
namespace {

using nlohmann::json;
__extension__ using u128 = unsigned __int128;

Ratio reduce(std::uint64_t num, std::uint64_t den) {
  if (den == 0) fail(ErrorCode::kValidation, "ratio denominator is zero");
  const auto g = std::gcd(num, den);
  return g == 0 ? Ratio{0, 1} : Ratio{num / g, den / g};
}

void check_ratios(const std::array<Ratio, 3>& ratios) {
  // a/b + c/d + e/f == 1  <=>  a*d*f + c*b*f + e*b*d == b*d*f
  const u128 b = ratios[0].den, d = ratios[1].den, f = ratios[2].den;
  const u128 lhs = u128{ratios[0].num} * d * f + u128{ratios[1].num} * b * f + u128{ratios[2].num} * b * d;
  if (lhs != b * d * f) {
    fail(ErrorCode::kValidation, "split ratios must sum to 1, got " + format_ratio(ratios[0]) + "+" +
                                     format_ratio(ratios[1]) + "+" + format_ratio(ratios[2]));
  }
}

std::uint64_t floor_share(std::size_t count, Ratio r) {
  return static_cast<std::uint64_t>(u128{count} * r.num / r.den);
}

json ratio_json(Ratio r) {
  const std::string text = format_ratio(r);
  if (text.find('/') != std::string::npos) return text;
  return json::parse(text);
}

Ratio ratio_from_json(const json& j) {
  if (j.is_string()) return parse_ratio(j.get<std::string>());
  if (j.is_number_unsigned() || j.is_number_integer()) return Ratio{j.get<std::uint64_t>(), 1};
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, j.get<double>());
  return parse_ratio(std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)));
}

}  // namespace

std::uint64_t Rng::uniform(std::uint64_t bound) {
  if (bound == ~std::uint64_t{0}) return next();
  const std::uint64_t range = bound + 1;
  // Reject the low (2^64 mod range) outputs so every residue is equally likely.
  const std::uint64_t threshold = (0 - range) % range;
  for (;;) {
    const std::uint64_t v = next();
    if (v >= threshold) return v % range;
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  mix(seed);
  for (const char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  mix(a);
  mix(b);
  return h;
}

Ratio parse_ratio(std::string_view text) {
  auto bad = [&] { fail(ErrorCode::kValidation, "invalid ratio '" + std::string(text) + "'"); };
  auto parse_u64 = [&](std::string_view s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) bad();
    return v;
  };
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    return reduce(parse_u64(text.substr(0, slash)), parse_u64(text.substr(slash + 1)));
  }
  const auto dot = text.find('.');
  if (dot == std::string_view::npos) return reduce(parse_u64(text), 1);
  const std::string_view whole = text.substr(0, dot);
  const std::string_view frac = text.substr(dot + 1);
  if (frac.size() > 18 || (whole.empty() && frac.empty())) bad();
  std::uint64_t den = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
  const std::uint64_t w = whole.empty() ? 0 : parse_u64(whole);
  const std::uint64_t f = frac.empty() ? 0 : parse_u64(frac);
  return reduce(w * den + f, den);
}

std::string format_ratio(Ratio r) {
  std::uint64_t den = r.den;
  int twos = 0, fives = 0;
  while (den % 2 == 0) { den /= 2; ++twos; }
  while (den % 5 == 0) { den /= 5; ++fives; }
  if (den != 1 || std::max(twos, fives) > 18) {
    return std::to_string(r.num) + "/" + std::to_string(r.den);
  }
  const int digits = std::max(twos, fives);
  std::uint64_t scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  const auto scaled = static_cast<std::uint64_t>(u128{r.num} * (scale / r.den));
  std::string out = std::to_string(scaled / scale);
  if (digits > 0) {
    std::string frac = std::to_string(scaled % scale);
    frac.insert(0, static_cast<std::size_t>(digits) - frac.size(), '0');
    while (!frac.empty() && frac.back() == '0') frac.pop_back();
    if (!frac.empty()) out += "." + frac;
  }
  return out;
}

std::array<Ratio, 3> parse_ratios(std::string_view text) {
  std::array<Ratio, 3> out;
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const auto comma = text.find(',', start);
    if ((i < 2) != (comma != std::string_view::npos)) {
      fail(ErrorCode::kValidation, "expected three comma-separated ratios, got '" + std::string(text) + "'");
    }
    out[static_cast<std::size_t>(i)] = parse_ratio(text.substr(start, comma - start));
    start = comma + 1;
  }
  check_ratios(out);
  return out;
}

std::vector<ClipManifest> parse_corpus(const std::string& json_text) {
  try {
    const json j = json::parse(json_text);
    std::vector<ClipManifest> clips;
    for (const auto& item : j) {
      ClipManifest c;
      c.id = item.at("id").get<std::string>();
      c.frame_count = item.at("frame_count").get<std::uint32_t>();
      c.fps = {item.value("fps_num", 30u), item.value("fps_den", 1u)};
      c.source_path = item.value("source", std::string());
      clips.push_back(std::move(c));
    }
    validate_corpus(clips);
    return clips;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("corpus manifest: ") + e.what());
  }
}

std::string format_corpus(const std::vector<ClipManifest>& clips) {
  json j = json::array();
  for (const auto& c : clips) {
    j.push_back({{"id", c.id},
                 {"frame_count", c.frame_count},
                 {"fps_num", c.fps.num},
                 {"fps_den", c.fps.den},
                 {"source", c.source_path}});
  }
  return j.dump(2) + "\n";
}

void validate_corpus(const std::vector<ClipManifest>& clips) {
  std::set<std::string_view> seen;
  for (const auto& c : clips) {
    if (c.frame_count < 1) fail(ErrorCode::kValidation, "clip '" + c.id + "' has no frames");
    if (c.fps.num == 0 || c.fps.den == 0) fail(ErrorCode::kValidation, "clip '" + c.id + "' has invalid fps");
    if (!seen.insert(c.id).second) fail(ErrorCode::kValidation, "duplicate clip id '" + c.id + "'");
  }
}

std::vector<ClipManifest> scan_corpus_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorCode::kIo, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> subdirs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / media::kFrameDirManifestName)) {
      subdirs.push_back(entry.path());
    }
  }
  std::sort(subdirs.begin(), subdirs.end());
  std::vector<ClipManifest> clips;
  for (const auto& sub : subdirs) {
    const auto m = media::read_frame_dir_manifest(sub);
    clips.push_back({sub.filename().string(), m.count, m.fps, sub.filename().string()});
  }
  if (clips.empty()) fail(ErrorCode::kEmptySequence, "no clip directories with manifests in " + dir.string());
  return clips;
}

TripletExtraction extract_triplets(std::string_view clip_id, std::uint32_t frame_count,
                                   std::uint32_t stride) {
  if (stride < 1) fail(ErrorCode::kValidation, "triplet stride must be >= 1");
  TripletExtraction out;
  if (frame_count < 3) {
    out.warnings.push_back("clip '" + std::string(clip_id) + "' has " + std::to_string(frame_count) +
                           " frame(s); at least 3 are needed for a triplet");
    return out;
  }
  for (std::uint64_t t = 0; t + 2 < frame_count; t += stride) {
    out.triplets.push_back({std::string(clip_id), static_cast<std::uint32_t>(t)});
  }
  return out;
}

TripletExtraction extract_triplets(std::string_view clip_id, const FrameSequence& clip,
                                   std::uint32_t stride) {
  return extract_triplets(clip_id, static_cast<std::uint32_t>(clip.frames.size()), stride);
}

std::string_view split_name(Split split) noexcept {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  fail(ErrorCode::kValidation, "unknown split '" + std::string(name) + "'");
}

std::vector<std::string> SplitAssignment::clips_in(Split split) const {
  std::vector<std::string> out;
  for (const auto& [id, s] : assignments) {
    if (s == split) out.push_back(id);
  }
  return out;
}

SplitAssignment split_clips(const std::vector<ClipManifest>& clips, const std::array<Ratio, 3>& ratios,
                            std::uint64_t seed) {
  if (clips.empty()) fail(ErrorCode::kValidation, "cannot split an empty corpus");
  check_ratios(ratios);
  validate_corpus(clips);

  std::vector<std::string> ids;
  ids.reserve(clips.size());
  for (const auto& c : clips) ids.push_back(c.id);
  std::sort(ids.begin(), ids.end());

  Rng rng(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform(i));
    std::swap(ids[i], ids[j]);
  }

  const auto n_val = floor_share(ids.size(), ratios[1]);
  const auto n_test = floor_share(ids.size(), ratios[2]);
  const auto n_train = ids.size() - n_val - n_test;

  SplitAssignment out;
  out.seed = seed;
  out.ratios = ratios;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Split s = i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);
    out.assignments.emplace(ids[i], s);
  }
  return out;
}

std::string format_split_file(const SplitAssignment& split) {
  json j;
  j["seed"] = split.seed;
  j["ratios"] = json::array({ratio_json(split.ratios[0]), ratio_json(split.ratios[1]),
                             ratio_json(split.ratios[2])});
  json assignments = json::object();
  for (const auto& [id, s] : split.assignments) assignments[id] = split_name(s);
  j["assignments"] = std::move(assignments);
  return j.dump(2) + "\n";
}

SplitAssignment parse_split_file(const std::string& json_text) {
  try {
    const json j = json::parse(json_text);
    SplitAssignment out;
    out.seed = j.at("seed").get<std::uint64_t>();
    const auto& ratios = j.at("ratios");
    if (!ratios.is_array() || ratios.size() != 3) fail(ErrorCode::kValidation, "split file needs 3 ratios");
    for (std::size_t i = 0; i < 3; ++i) out.ratios[i] = ratio_from_json(ratios[i]);
    check_ratios(out.ratios);
    for (const auto& [id, name] : j.at("assignments").items()) {
      out.assignments.emplace(id, parse_split(name.get<std::string>()));
    }
    return out;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("split file: ") + e.what());
  }
}

// --- augmentation -----------------------------------------------------------

std::vector<Triplet> TripletIndex::in(Split split) const {
  std::vector<Triplet> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(e.triplet);
  }
  return out;
}

TripletIndex build_triplet_index(const std::vector<ClipManifest>& clips, const SplitAssignment& split,
                                 std::uint32_t stride) {
  std::vector<const ClipManifest*> sorted;
  for (const auto& c : clips) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
  TripletIndex index;
  for (const auto* clip : sorted) {
    const auto it = split.assignments.find(clip->id);
    if (it == split.assignments.end()) {
      fail(ErrorCode::kValidation, "clip '" + clip->id + "' is not in the split file");
    }
    auto ex = extract_triplets(clip->id, clip->frame_count, stride);
    for (auto& t : ex.triplets) index.entries.push_back({std::move(t), it->second});
    for (auto& w : ex.warnings) index.warnings.push_back(std::move(w));
  }
  return index;
}

std::string format_triplet_index(const TripletIndex& index) {
  json triplets = json::array();
  for (const auto& e : index.entries) {
    triplets.push_back(
        {{"clip_id", e.triplet.clip_id}, {"t", e.triplet.t}, {"split", std::string(split_name(e.split))}});
  }
  json warnings = json::array();
  for (const auto& w : index.warnings) warnings.push_back(w);
  return json{{"triplets", triplets}, {"warnings", warnings}}.dump(2) + "\n";
}

TripletIndex parse_triplet_index(const std::string& json_text) {
  TripletIndex index;
  try {
    const json j = json::parse(json_text);
    for (const auto& e : j.at("triplets")) {
      index.entries.push_back(
          {{e.at("clip_id").get<std::string>(), e.at("t").get<std::uint32_t>()},
           parse_split(e.at("split").get<std::string>())});
    }
    if (j.contains("warnings")) {
      for (const auto& w : j.at("warnings")) index.warnings.push_back(w.get<std::string>());
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("triplet index: ") + e.what());
  }
  return index;
}

Frame crop_frame(const Frame& frame, int x, int y, int width, int height) {
  auto axis_error = [&](const char* axis, int origin, int size, int limit) {
    fail(ErrorCode::kBounds, std::string("crop overflows ") + axis + " axis: " + std::to_string(origin) +
                                 " + " + std::to_string(size) + " > " + std::to_string(limit));
  };
  if (width < 1 || height < 1) fail(ErrorCode::kBounds, "crop size must be positive");
  if (x < 0 || x + width > frame.width()) axis_error("x", x, width, frame.width());
  if (y < 0 || y + height > frame.height()) axis_error("y", y, height, frame.height());
  Frame out(width, height);
  auto dst = out.mutable_pixels();
  const auto src = frame.pixels();
  for (int row = 0; row < height; ++row) {
    const auto* from = src.data() + (static_cast<std::size_t>(y + row) * frame.width() + x) * 3;
    std::copy(from, from + static_cast<std::size_t>(width) * 3,
              dst.data() + static_cast<std::size_t>(row) * width * 3);
  }
  return out;
}

Frame mirror_frame(const Frame& frame) {
  Frame out(frame.width(), frame.height());
  auto dst = out.mutable_pixels();
  const auto src = frame.pixels();
  const auto w = static_cast<std::size_t>(frame.width());
  for (std::size_t row = 0; row < static_cast<std::size_t>(frame.height()); ++row) {
    for (std::size_t col = 0; col < w; ++col) {
      const auto s = (row * w + (w - 1 - col)) * 3;
      const auto d = (row * w + col) * 3;
      dst[d] = src[s];
      dst[d + 1] = src[s + 1];
      dst[d + 2] = src[s + 2];
    }
  }
  return out;
}

AugmentedTriplet make_augmented(Triplet source, TripletFrames frames) {
  require_same_size(frames.first, frames.middle, "triplet");
  require_same_size(frames.first, frames.last, "triplet");
  AugmentedTriplet out;
  out.source = std::move(source);
  out.crop = {0, 0, frames.first.width(), frames.first.height()};
  out.frames = std::move(frames);
  return out;
}

AugmentedTriplet crop(const AugmentedTriplet& in, int x, int y, int width, int height) {
  AugmentedTriplet out = in;
  out.frames.first = crop_frame(in.frames.first, x, y, width, height);
  out.frames.middle = crop_frame(in.frames.middle, x, y, width, height);
  out.frames.last = crop_frame(in.frames.last, x, y, width, height);
  // Map the origin back to unflipped source coordinates.
  const int pre_flip_x = in.hflip ? in.crop.width - x - width : x;
  out.crop = {in.crop.x + pre_flip_x, in.crop.y + y, width, height};
  return out;
}

AugmentedTriplet hflip(const AugmentedTriplet& in) {
  AugmentedTriplet out = in;
  out.frames.first = mirror_frame(in.frames.first);
  out.frames.middle = mirror_frame(in.frames.middle);
  out.frames.last = mirror_frame(in.frames.last);
  out.hflip = !in.hflip;
  return out;
}

AugmentedTriplet time_reverse(const AugmentedTriplet& in) {
  AugmentedTriplet out = in;
  std::swap(out.frames.first, out.frames.last);
  out.time_reversed = !in.time_reversed;
  return out;
}

AugmentationPlan plan_augmentation(int frame_width, int frame_height, std::uint64_t seed, int width, int height) {
  if (width < 1 || height < 1) fail(ErrorCode::kBounds, "crop size must be positive");
  if (frame_width < width || frame_height < height) {
    fail(ErrorCode::kBounds, "frame " + std::to_string(frame_width) + "x" + std::to_string(frame_height) +
                                 " is smaller than the " + std::to_string(width) + "x" +
                                 std::to_string(height) + " crop");
  }
  Rng rng(seed);
  AugmentationPlan plan;
  plan.crop.x = static_cast<int>(rng.uniform(static_cast<std::uint64_t>(frame_width - width)));
  plan.crop.y = static_cast<int>(rng.uniform(static_cast<std::uint64_t>(frame_height - height)));
  plan.crop.width = width;
  plan.crop.height = height;
  plan.hflip = rng.coin();
  plan.time_reversed = rng.coin();
  return plan;
}

AugmentedTriplet random_augment(const AugmentedTriplet& in, std::uint64_t seed, int width, int height) {
  const AugmentationPlan plan = plan_augmentation(in.frames.first.width(), in.frames.first.height(), seed, width, height);
  AugmentedTriplet out = crop(in, plan.crop.x, plan.crop.y, width, height);
  if (plan.hflip) out = hflip(out);
  if (plan.time_reversed) out = time_reverse(out);
  return out;
}

std::string format_augmentation_line(const Triplet& source, const AugmentationPlan& plan) {
  json j;
  j["clip_id"] = source.clip_id;
  j["t"] = source.t;
  j["crop"] = {{"x", plan.crop.x}, {"y", plan.crop.y}, {"w", plan.crop.width}, {"h", plan.crop.height}};
  j["hflip"] = plan.hflip;
  j["time_reversed"] = plan.time_reversed;
  return j.dump();
}

std::string format_augmentation_line(const AugmentedTriplet& aug) {
  return format_augmentation_line(aug.source, {aug.crop, aug.hflip, aug.time_reversed});
}

}  // namespace slomo::dataset
