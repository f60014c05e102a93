#include <graspalign/io.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace graspalign {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) {
    throw InvalidInput(msg);
  }
}

std::string format_float(double v) {
  // Values are float32 per the declared property type; 9 significant
  // digits round-trip any float32 exactly.
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<float>(v));
  return buf;
}

// Reads one whitespace/comment-delimited PNM header token.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') {
        c = in.get();
      }
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

}  // namespace

size_t BinaryRaster::count_set() const {
  return static_cast<size_t>(
      std::count_if(data.begin(), data.end(), [](uint8_t v) { return v != 0; }));
}

void RgbImage::set(int col, int row, uint8_t r, uint8_t g, uint8_t b) {
  const size_t i = (static_cast<size_t>(row) * width + col) * 3;
  rgb[i] = r;
  rgb[i + 1] = g;
  rgb[i + 2] = b;
}

void write_ply(const std::filesystem::path& path, const DenseCloud& cloud) {
  cloud.validate();
  std::ofstream out(path);
  require(out.good(), "write_ply: cannot open " + path.string());
  const bool with_conf = cloud.confidence.has_value();
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << cloud.points.rows() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (with_conf) {
    out << "property float confidence\n";
  }
  out << "end_header\n";
  for (Eigen::Index i = 0; i < cloud.points.rows(); ++i) {
    out << format_float(cloud.points(i, 0)) << ' '
        << format_float(cloud.points(i, 1)) << ' '
        << format_float(cloud.points(i, 2));
    if (with_conf) {
      out << ' ' << format_float((*cloud.confidence)(i));
    }
    out << '\n';
  }
  require(out.good(), "write_ply: write failed for " + path.string());
}

DenseCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "read_ply: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  require(line == "ply", "read_ply: missing ply magic in " + path.string());

  Eigen::Index n_vertices = -1;
  std::vector<std::string> properties;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = (fmt == "ascii");
    } else if (word == "element") {
      std::string name;
      ls >> name >> n_vertices;
      require(name == "vertex", "read_ply: only vertex elements supported");
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      properties.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  require(ascii, "read_ply: only ascii format supported");
  require(n_vertices >= 1, "read_ply: no vertices in " + path.string());
  int ix = -1, iy = -1, iz = -1, ic = -1;
  for (size_t i = 0; i < properties.size(); ++i) {
    if (properties[i] == "x") ix = static_cast<int>(i);
    if (properties[i] == "y") iy = static_cast<int>(i);
    if (properties[i] == "z") iz = static_cast<int>(i);
    if (properties[i] == "confidence") ic = static_cast<int>(i);
  }
  require(ix >= 0 && iy >= 0 && iz >= 0, "read_ply: missing x/y/z properties");

  DenseCloud cloud;
  cloud.points.resize(n_vertices, 3);
  if (ic >= 0) {
    cloud.confidence = VecX(n_vertices);
  }
  std::vector<double> row(properties.size());
  for (Eigen::Index v = 0; v < n_vertices; ++v) {
    for (size_t p = 0; p < properties.size(); ++p) {
      require(static_cast<bool>(in >> row[p]),
              "read_ply: truncated vertex data");
    }
    cloud.points(v, 0) = static_cast<float>(row[static_cast<size_t>(ix)]);
    cloud.points(v, 1) = static_cast<float>(row[static_cast<size_t>(iy)]);
    cloud.points(v, 2) = static_cast<float>(row[static_cast<size_t>(iz)]);
    if (ic >= 0) {
      (*cloud.confidence)(v) =
          static_cast<float>(row[static_cast<size_t>(ic)]);
    }
  }
  cloud.validate();
  return cloud;
}

BinaryRaster read_pgm_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "read_pgm_mask: cannot open " + path.string());
  require(pnm_token(in) == "P5", "read_pgm_mask: not a P5 graymap");
  const int width = std::stoi(pnm_token(in));
  const int height = std::stoi(pnm_token(in));
  const int maxval = std::stoi(pnm_token(in));
  require(width > 0 && height > 0, "read_pgm_mask: bad dimensions");
  require(maxval == 255, "read_pgm_mask: expected maxval 255");

  BinaryRaster mask;
  mask.width = width;
  mask.height = height;
  mask.data.resize(static_cast<size_t>(width) * height);
  std::vector<uint8_t> raw(mask.data.size());
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  require(in.gcount() == static_cast<std::streamsize>(raw.size()),
          "read_pgm_mask: truncated pixel data");
  for (size_t i = 0; i < raw.size(); ++i) {
    mask.data[i] = raw[i] >= 128 ? 1 : 0;
  }
  return mask;
}

void write_pgm_mask(const std::filesystem::path& path,
                    const BinaryRaster& mask) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "write_pgm_mask: cannot open " + path.string());
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<uint8_t> raw(mask.data.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    raw[i] = mask.data[i] ? 255 : 0;
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  require(out.good(), "write_pgm_mask: write failed");
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "write_ppm: cannot open " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
  require(out.good(), "write_ppm: write failed");
}

}  // namespace graspalign
