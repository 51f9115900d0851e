#include "ofds/proposal_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ofds/atomic_file.hpp"
#include "ofds/errors.hpp"

namespace ofds {
namespace {

using nlohmann::json;

constexpr std::array<char, 8> kMagic = {'O', 'F', 'D', 'S', 'F', 'E', 'A', 'T'};
constexpr std::size_t kHeaderSize = 8 + 4 + 8 + 4;

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  std::make_unsigned_t<T> v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::make_unsigned_t<T>>(p[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

BBox parse_bbox(const json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("bbox must be [x,y,w,h]");
  BBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (b.w < 0 || b.h < 0) throw DataError("bbox has negative size");
  return b;
}

json bbox_json(const BBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

}  // namespace

FeatureMatrix read_feature_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("feature blob: cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < kMagic.size() ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw DataError("feature blob: bad magic");
  }
  if (bytes.size() < kHeaderSize) throw DataError("feature blob: truncated header");
  const auto version = get_le<std::uint32_t>(bytes.data() + 8);
  if (version != kFeatureBlobVersion) {
    throw DataError("feature blob: unsupported version " + std::to_string(version));
  }
  const auto count = get_le<std::uint64_t>(bytes.data() + 12);
  const auto dim = get_le<std::uint32_t>(bytes.data() + 20);
  const std::uint64_t payload = bytes.size() - kHeaderSize;
  if (dim != 0 && count > payload / 4 / dim) throw DataError("feature blob: truncated payload");
  if (payload != count * dim * 4) throw DataError("feature blob: payload size mismatch");

  std::vector<float> data(count * dim);
  const unsigned char* p = bytes.data() + kHeaderSize;
  for (std::size_t i = 0; i < data.size(); ++i, p += 4) {
    data[i] = std::bit_cast<float>(get_le<std::uint32_t>(p));
  }
  return FeatureMatrix(count, dim, std::move(data));
}

namespace {

std::string encode_feature_blob(const FeatureMatrix& features) {
  std::string out(kMagic.begin(), kMagic.end());
  out.reserve(kHeaderSize + features.data().size() * 4);
  put_le<std::uint32_t>(out, kFeatureBlobVersion);
  put_le<std::uint64_t>(out, features.rows());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(features.dim()));
  for (float v : features.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

void parse_manifest_line(const json& j, ProposalDataset& ds,
                         std::vector<std::pair<std::int64_t, std::string>>& classes) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "class") {
    classes.emplace_back(j.at("id").get<std::int64_t>(), j.at("name").get<std::string>());
  } else if (type == "image") {
    ImageRecord img;
    img.id = j.at("id").get<std::string>();
    img.width = j.at("width").get<std::int64_t>();
    img.height = j.at("height").get<std::int64_t>();
    if (auto it = j.find("image_feature"); it != j.end() && !it->is_null()) {
      img.image_feature = it->get<std::vector<float>>();
    }
    ds.images.push_back(std::move(img));
  } else if (type == "proposal") {
    ObjectProposal p;
    p.image_id = j.at("image_id").get<std::string>();
    p.class_id = j.at("class_id").get<std::int32_t>();
    p.confidence = j.at("confidence").get<double>();
    p.bbox = parse_bbox(j.at("bbox"));
    const auto fi = j.at("feature_index").get<std::int64_t>();
    if (fi < 0) throw DataError("negative feature_index");
    p.feature_index = static_cast<std::size_t>(fi);
    ds.proposals.push_back(std::move(p));
  } else if (type == "gt") {
    GroundTruthObject g;
    g.image_id = j.at("image_id").get<std::string>();
    g.class_id = j.at("class_id").get<std::int32_t>();
    g.bbox = parse_bbox(j.at("bbox"));
    ds.ground_truth.push_back(std::move(g));
  } else {
    throw DataError("unknown line type '" + type + "'");
  }
}

}  // namespace

void write_feature_blob(const std::filesystem::path& path, const FeatureMatrix& features) {
  write_file_atomic(path, encode_feature_blob(features));
}

void validate_dataset(const ProposalDataset& ds) {
  const DatasetIndex index(ds);  // rejects duplicate and dangling image ids
  std::optional<std::size_t> image_dim;
  for (const auto& img : ds.images) {
    if (img.width <= 0 || img.height <= 0) {
      throw DataError("image '" + img.id + "' has non-positive size");
    }
    if (img.image_feature) {
      if (image_dim && *image_dim != img.image_feature->size()) {
        throw DataError("dimension mismatch in image_feature of '" + img.id + "'");
      }
      image_dim = img.image_feature->size();
    }
  }
  if (ds.features.rows() != ds.proposals.size()) {
    throw DataError("feature count mismatch: blob has " + std::to_string(ds.features.rows()) +
                    " rows, manifest has " + std::to_string(ds.proposals.size()) + " proposals");
  }
  for (const auto& p : ds.proposals) {
    if (!ds.classes.contains(p.class_id)) {
      throw DataError("dangling class_id " + std::to_string(p.class_id));
    }
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) {
      throw DataError("confidence out of [0,1] on image '" + p.image_id + "'");
    }
    if (p.feature_index >= ds.features.rows()) {
      throw DataError("feature_index " + std::to_string(p.feature_index) + " out of range");
    }
    if (p.bbox.w < 0 || p.bbox.h < 0) throw DataError("bbox has negative size");
  }
  for (const auto& g : ds.ground_truth) {
    if (!ds.classes.contains(g.class_id)) {
      throw DataError("dangling class_id " + std::to_string(g.class_id) + " in ground truth");
    }
  }
}

ProposalDataset load_dataset(const std::filesystem::path& manifest_path,
                             const std::filesystem::path& features_path,
                             std::optional<std::size_t> expected_dim) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("manifest: cannot open '" + manifest_path.string() + "'");

  ProposalDataset ds;
  std::vector<std::pair<std::int64_t, std::string>> classes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      parse_manifest_line(json::parse(line), ds, classes);
    } catch (const json::exception& e) {
      throw DataError("manifest line " + std::to_string(line_no) + ": malformed JSON (" +
                      e.what() + ")");
    } catch (const DataError& e) {
      throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  std::sort(classes.begin(), classes.end());
  std::vector<std::string> names;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].first != static_cast<std::int64_t>(i)) {
      throw DataError("class ids must be contiguous from 0");
    }
    names.push_back(classes[i].second);
  }
  ds.classes = ClassTable(std::move(names));

  ds.features = read_feature_blob(features_path);
  if (ds.features.rows() != ds.proposals.size()) {
    throw DataError("feature count mismatch: blob has " + std::to_string(ds.features.rows()) +
                    " rows, manifest has " + std::to_string(ds.proposals.size()) + " proposals");
  }
  if (expected_dim && ds.features.dim() != *expected_dim && !ds.features.empty()) {
    throw DataError("dimension mismatch: blob dim " + std::to_string(ds.features.dim()) +
                    ", expected " + std::to_string(*expected_dim));
  }
  validate_dataset(ds);
  return ds;
}

void write_dataset(const ProposalDataset& ds, const std::filesystem::path& manifest_path,
                   const std::filesystem::path& features_path) {
  validate_dataset(ds);
  std::string out;
  for (std::size_t c = 0; c < ds.classes.size(); ++c) {
    out += json{{"type", "class"}, {"id", c}, {"name", ds.classes.names()[c]}}.dump();
    out += '\n';
  }
  for (const auto& img : ds.images) {
    json j{{"type", "image"}, {"id", img.id}, {"width", img.width}, {"height", img.height}};
    if (img.image_feature) j["image_feature"] = *img.image_feature;
    out += j.dump();
    out += '\n';
  }
  for (const auto& p : ds.proposals) {
    out += json{{"type", "proposal"},       {"image_id", p.image_id},
                {"class_id", p.class_id},    {"confidence", p.confidence},
                {"bbox", bbox_json(p.bbox)}, {"feature_index", p.feature_index}}
               .dump();
    out += '\n';
  }
  for (const auto& g : ds.ground_truth) {
    out += json{{"type", "gt"},
                {"image_id", g.image_id},
                {"class_id", g.class_id},
                {"bbox", bbox_json(g.bbox)}}
               .dump();
    out += '\n';
  }
  write_feature_blob(features_path, ds.features);
  write_file_atomic(manifest_path, out);
}

namespace {

template <typename Keep>
ProposalDataset keep_proposals(const ProposalDataset& ds, Keep keep) {
  ProposalDataset out;
  out.images = ds.images;
  out.classes = ds.classes;
  out.ground_truth = ds.ground_truth;
  out.features = FeatureMatrix(0, ds.features.dim());
  for (const auto& p : ds.proposals) {
    if (!keep(p)) continue;
    ObjectProposal kept = p;
    kept.feature_index = out.features.rows();
    out.features.append_row(ds.feature_of(p));
    out.proposals.push_back(std::move(kept));
  }
  return out;
}

}  // namespace

ProposalDataset filter_small_boxes(const ProposalDataset& ds, double min_area_fraction) {
  if (!(min_area_fraction >= 0.0 && min_area_fraction < 1.0)) {
    throw UsageError("min_area_fraction must be in [0,1)");
  }
  const DatasetIndex index(ds);
  return keep_proposals(ds, [&](const ObjectProposal& p) {
    const auto& img = ds.images[index.image_index(p.image_id)];
    const double image_area = static_cast<double>(img.width) * static_cast<double>(img.height);
    return p.bbox.area() / image_area >= min_area_fraction;
  });
}

ProposalDataset filter_by_confidence(const ProposalDataset& ds, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw UsageError("confidence threshold must be in [0,1]");
  }
  return keep_proposals(ds, [&](const ObjectProposal& p) { return p.confidence >= threshold; });
}

std::vector<std::size_t> class_counts(const ProposalDataset& ds) {
  std::vector<std::size_t> counts(ds.classes.size(), 0);
  for (const auto& p : ds.proposals) ++counts[static_cast<std::size_t>(p.class_id)];
  return counts;
}

}  // namespace ofds
