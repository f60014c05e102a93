#include <graspalign/pointmaps.hpp>

#include <array>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace graspalign {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) {
    throw InvalidInput(msg);
  }
}

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void Pointmap::validate() const {
  if (width <= 0 || height <= 0) {
    throw InvalidInput("Pointmap: non-positive dimensions");
  }
  if (coords.rows() != pixel_count()) {
    throw InvalidInput("Pointmap: coordinate row count mismatch");
  }
  if (!coords.allFinite()) {
    throw InvalidInput("Pointmap: non-finite coordinates");
  }
}

void ConfidenceMap::validate() const {
  if (width <= 0 || height <= 0) {
    throw InvalidInput("ConfidenceMap: non-positive dimensions");
  }
  if (values.size() != static_cast<Eigen::Index>(width) * height) {
    throw InvalidInput("ConfidenceMap: value count mismatch");
  }
  if (!values.allFinite() || (values.array() < 0.0).any()) {
    throw InvalidInput("ConfidenceMap: values must be finite and >= 0");
  }
}

void PairPrediction::validate() const {
  if (n == m) {
    throw InvalidInput("PairPrediction: pair members must differ");
  }
  if (n < 0 || m < 0) {
    throw InvalidInput("PairPrediction: negative image index");
  }
  x_nn.validate();
  x_nm.validate();
  c_nn.validate();
  c_nm.validate();
  const bool same_dims =
      x_nn.width == x_nm.width && x_nn.height == x_nm.height &&
      x_nn.width == c_nn.width && x_nn.height == c_nn.height &&
      x_nn.width == c_nm.width && x_nn.height == c_nm.height;
  if (!same_dims) {
    throw InvalidInput("PairPrediction: rasters must share dimensions");
  }
}

PairPrediction mask_confidences(const PairPrediction& pred,
                                const BinaryRaster& mask_n,
                                const BinaryRaster& mask_m) {
  pred.validate();
  if (mask_n.width != pred.x_nn.width || mask_n.height != pred.x_nn.height ||
      mask_m.width != pred.x_nn.width || mask_m.height != pred.x_nn.height) {
    throw InvalidInput("mask_confidences: mask dimensions mismatch");
  }
  PairPrediction out = pred;
  for (int h = 0; h < pred.x_nn.height; ++h) {
    for (int w = 0; w < pred.x_nn.width; ++w) {
      if (mask_n.at(w, h) == 0) {
        out.c_nn.values(out.c_nn.index(w, h)) = 0.0;
      }
      if (mask_m.at(w, h) == 0) {
        out.c_nm.values(out.c_nm.index(w, h)) = 0.0;
      }
    }
  }
  return out;
}

void write_pmap(const std::filesystem::path& path, const Pointmap& map,
                const ConfidenceMap& conf) {
  map.validate();
  conf.validate();
  require(map.width == conf.width && map.height == conf.height,
          "write_pmap: map/confidence dimensions mismatch");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "write_pmap: cannot open " + path.string());
  out.write("PMAP", 4);
  write_u32(out, 1u);
  write_u32(out, static_cast<uint32_t>(map.width));
  write_u32(out, static_cast<uint32_t>(map.height));
  const Eigen::Index n = map.pixel_count();
  std::vector<float> buf(static_cast<size_t>(n) * 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    buf[static_cast<size_t>(i) * 3 + 0] = static_cast<float>(map.coords(i, 0));
    buf[static_cast<size_t>(i) * 3 + 1] = static_cast<float>(map.coords(i, 1));
    buf[static_cast<size_t>(i) * 3 + 2] = static_cast<float>(map.coords(i, 2));
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  std::vector<float> cbuf(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    cbuf[static_cast<size_t>(i)] = static_cast<float>(conf.values(i));
  }
  out.write(reinterpret_cast<const char*>(cbuf.data()),
            static_cast<std::streamsize>(cbuf.size() * sizeof(float)));
  require(out.good(), "write_pmap: write failed for " + path.string());
}

std::pair<Pointmap, ConfidenceMap> read_pmap(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "read_pmap: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  require(in.gcount() == 4 && std::memcmp(magic, "PMAP", 4) == 0,
          "read_pmap: bad magic in " + path.string());
  const uint32_t version = read_u32(in);
  require(version == 1, "read_pmap: unsupported version");
  const uint32_t w = read_u32(in);
  const uint32_t h = read_u32(in);
  require(w > 0 && h > 0 && w < (1u << 16) && h < (1u << 16),
          "read_pmap: implausible dimensions");

  Pointmap map;
  map.width = static_cast<int>(w);
  map.height = static_cast<int>(h);
  const Eigen::Index n = map.pixel_count();
  map.coords.resize(n, 3);
  std::vector<float> buf(static_cast<size_t>(n) * 3);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  require(in.gcount() ==
              static_cast<std::streamsize>(buf.size() * sizeof(float)),
          "read_pmap: truncated coordinates");
  for (Eigen::Index i = 0; i < n; ++i) {
    map.coords(i, 0) = buf[static_cast<size_t>(i) * 3 + 0];
    map.coords(i, 1) = buf[static_cast<size_t>(i) * 3 + 1];
    map.coords(i, 2) = buf[static_cast<size_t>(i) * 3 + 2];
  }

  ConfidenceMap conf;
  conf.width = map.width;
  conf.height = map.height;
  conf.values.resize(n);
  std::vector<float> cbuf(static_cast<size_t>(n));
  in.read(reinterpret_cast<char*>(cbuf.data()),
          static_cast<std::streamsize>(cbuf.size() * sizeof(float)));
  require(in.gcount() ==
              static_cast<std::streamsize>(cbuf.size() * sizeof(float)),
          "read_pmap: truncated confidences");
  for (Eigen::Index i = 0; i < n; ++i) {
    conf.values(i) = cbuf[static_cast<size_t>(i)];
  }
  map.validate();
  conf.validate();
  return {map, conf};
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<std::array<std::string, 2>>& files,
                    const std::vector<std::pair<int, int>>& pairs) {
  require(files.size() == pairs.size(), "write_manifest: size mismatch");
  nlohmann::json j = nlohmann::json::array();
  for (size_t i = 0; i < pairs.size(); ++i) {
    nlohmann::json entry;
    entry["n"] = pairs[i].first;
    entry["m"] = pairs[i].second;
    entry["x_nn"] = files[i][0];
    entry["x_nm"] = files[i][1];
    j.push_back(entry);
  }
  std::ofstream out(path);
  require(out.good(), "write_manifest: cannot open " + path.string());
  out << j.dump(2) << "\n";
  require(out.good(), "write_manifest: write failed");
}

std::vector<PairPrediction> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "read_manifest: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("read_manifest: malformed JSON: " +
                       std::string(e.what()));
  }
  require(j.is_array(), "read_manifest: expected a JSON array of pairs");
  const auto base = path.parent_path();
  std::vector<PairPrediction> preds;
  preds.reserve(j.size());
  for (const auto& entry : j) {
    require(entry.contains("n") && entry.contains("m") &&
                entry.contains("x_nn") && entry.contains("x_nm"),
            "read_manifest: pair entry missing n/m/x_nn/x_nm");
    PairPrediction pred;
    pred.n = entry["n"].get<int>();
    pred.m = entry["m"].get<int>();
    auto resolve = [&base](const std::string& p) {
      const std::filesystem::path fp(p);
      return fp.is_absolute() ? fp : base / fp;
    };
    std::tie(pred.x_nn, pred.c_nn) =
        read_pmap(resolve(entry["x_nn"].get<std::string>()));
    std::tie(pred.x_nm, pred.c_nm) =
        read_pmap(resolve(entry["x_nm"].get<std::string>()));
    pred.validate();
    preds.push_back(std::move(pred));
  }
  return preds;
}

}  // namespace graspalign
