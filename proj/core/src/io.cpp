#include "wsid/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace wsid {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)((v >> 8) & 0xff),
                        (unsigned char)((v >> 16) & 0xff),
                        (unsigned char)((v >> 24) & 0xff)};
  os.write((const char*)b, 4);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read((char*)b, 4);
  return (uint32_t)b[0] | ((uint32_t)b[1] << 8) | ((uint32_t)b[2] << 16) |
         ((uint32_t)b[3] << 24);
}

void put_f32(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(os, u);
}

float get_f32(std::istream& is) {
  const uint32_t u = get_u32(is);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

struct PngIo {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  bool writing = false;

  ~PngIo() {
    if (png) {
      if (writing)
        png_destroy_write_struct(&png, info ? &info : nullptr);
      else
        png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
    if (fp) std::fclose(fp);
  }
};

void open_png_write(PngIo& io, const std::string& path) {
  io.writing = true;
  io.fp = std::fopen(path.c_str(), "wb");
  if (!io.fp) throw std::runtime_error("cannot open for writing: " + path);
  io.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!io.png) throw std::runtime_error("png_create_write_struct failed");
  io.info = png_create_info_struct(io.png);
  if (!io.info) throw std::runtime_error("png_create_info_struct failed");
  png_init_io(io.png, io.fp);
  png_set_compression_level(io.png, 6);
}

void open_png_read(PngIo& io, const std::string& path) {
  io.fp = std::fopen(path.c_str(), "rb");
  if (!io.fp) throw std::runtime_error("cannot open: " + path);
  io.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!io.png) throw std::runtime_error("png_create_read_struct failed");
  io.info = png_create_info_struct(io.png);
  if (!io.info) throw std::runtime_error("png_create_info_struct failed");
  png_init_io(io.png, io.fp);
}

uint8_t quant8(double v) {
  return (uint8_t)std::clamp(std::lround(v), 0L, 255L);
}

}  // namespace

void write_tensor_file(const std::string& path, const Tensor& t) {
  if (!t.defined()) throw std::invalid_argument("write_tensor_file: undefined tensor");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write("WSID", 4);
  put_u32(os, 1);
  put_u32(os, (uint32_t)t.ndim());
  for (int i = 0; i < t.ndim(); ++i) put_u32(os, (uint32_t)t.dim(i));
  for (double v : t.data()) put_f32(os, (float)v);
  if (!os) throw std::runtime_error("write failed: " + path);
}

Tensor read_tensor_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "WSID", 4) != 0)
    throw std::runtime_error(path + ": bad magic at offset 0");
  const uint32_t version = get_u32(is);
  if (!is || version != 1)
    throw std::runtime_error(path + ": unsupported version at offset 4");
  const uint32_t ndim = get_u32(is);
  if (!is || ndim == 0 || ndim > 8)
    throw std::runtime_error(path + ": bad rank at offset 8");
  Shape shape(ndim);
  long long numel = 1;
  for (uint32_t i = 0; i < ndim; ++i) {
    const uint32_t d = get_u32(is);
    if (!is || d == 0)
      throw std::runtime_error(path + ": bad extent at offset " +
                               std::to_string(12 + 4 * i));
    shape[i] = (int)d;
    numel *= d;
  }
  std::vector<double> data(numel);
  for (long long i = 0; i < numel; ++i) {
    data[i] = get_f32(is);
    if (!is)
      throw std::runtime_error(path + ": truncated payload at offset " +
                               std::to_string(12 + 4 * ndim + 4 * i));
  }
  return Tensor::from_data(std::move(shape), std::move(data));
}

void write_plane_file(const std::string& path, const Plane& p) {
  write_tensor_file(path, Tensor::from_data({p.h, p.w}, p.v));
}

Plane read_plane_file(const std::string& path) {
  Tensor t = read_tensor_file(path);
  if (t.ndim() != 2)
    throw std::runtime_error(path + ": expected a 2-D plane, got " +
                             shape_str(t.shape()));
  Plane p(t.dim(0), t.dim(1));
  p.v = t.data();
  return p;
}

void write_png_rgb(const std::string& path, const RgbImage& img) {
  const int h = img.height(), w = img.width();
  PngIo io;
  open_png_write(io, path);
  if (setjmp(png_jmpbuf(io.png)))
    throw std::runtime_error("png write error: " + path);
  png_set_IHDR(io.png, io.info, w, h, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(io.png, io.info);
  std::vector<uint8_t> row(3 * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[3 * x] = quant8(img.r.at(y, x));
      row[3 * x + 1] = quant8(img.g.at(y, x));
      row[3 * x + 2] = quant8(img.b.at(y, x));
    }
    png_write_row(io.png, row.data());
  }
  png_write_end(io.png, nullptr);
}

RgbImage read_png_rgb(const std::string& path) {
  PngIo io;
  open_png_read(io, path);
  if (setjmp(png_jmpbuf(io.png)))
    throw std::runtime_error("png read error: " + path);
  png_read_info(io.png, io.info);
  const int w = png_get_image_width(io.png, io.info);
  const int h = png_get_image_height(io.png, io.info);
  // Normalize whatever comes in to 8-bit RGB.
  png_set_expand(io.png);
  if (png_get_bit_depth(io.png, io.info) == 16) png_set_strip_16(io.png);
  const int color = png_get_color_type(io.png, io.info);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(io.png);
  png_set_strip_alpha(io.png);
  png_read_update_info(io.png, io.info);

  RgbImage img(h, w);
  std::vector<uint8_t> row(png_get_rowbytes(io.png, io.info));
  for (int y = 0; y < h; ++y) {
    png_read_row(io.png, row.data(), nullptr);
    for (int x = 0; x < w; ++x) {
      img.r.at(y, x) = row[3 * x];
      img.g.at(y, x) = row[3 * x + 1];
      img.b.at(y, x) = row[3 * x + 2];
    }
  }
  return img;
}

void write_label_png(const std::string& path, const LabelMap& labels) {
  PngIo io;
  open_png_write(io, path);
  if (setjmp(png_jmpbuf(io.png)))
    throw std::runtime_error("png write error: " + path);
  png_set_IHDR(io.png, io.info, labels.w, labels.h, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(io.png, io.info);
  std::vector<uint8_t> row(2 * labels.w);
  for (int y = 0; y < labels.h; ++y) {
    for (int x = 0; x < labels.w; ++x) {
      const int v = std::clamp(labels.at(y, x), 0, 65535);
      row[2 * x] = (uint8_t)(v >> 8);  // PNG is big-endian
      row[2 * x + 1] = (uint8_t)(v & 0xff);
    }
    png_write_row(io.png, row.data());
  }
  png_write_end(io.png, nullptr);
}

LabelMap read_label_png(const std::string& path) {
  PngIo io;
  open_png_read(io, path);
  if (setjmp(png_jmpbuf(io.png)))
    throw std::runtime_error("png read error: " + path);
  png_read_info(io.png, io.info);
  const int w = png_get_image_width(io.png, io.info);
  const int h = png_get_image_height(io.png, io.info);
  if (png_get_color_type(io.png, io.info) != PNG_COLOR_TYPE_GRAY)
    throw std::runtime_error(path + ": label PNG must be grayscale");
  const int depth = png_get_bit_depth(io.png, io.info);
  if (depth != 16 && depth != 8)
    throw std::runtime_error(path + ": label PNG must be 8- or 16-bit");
  png_read_update_info(io.png, io.info);

  LabelMap labels(h, w);
  std::vector<uint8_t> row(png_get_rowbytes(io.png, io.info));
  for (int y = 0; y < h; ++y) {
    png_read_row(io.png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      labels.at(y, x) = depth == 16 ? ((int)row[2 * x] << 8) | row[2 * x + 1]
                                    : row[x];
  }
  return labels;
}

void write_png_gray(const std::string& path, const Plane& p) {
  PngIo io;
  open_png_write(io, path);
  if (setjmp(png_jmpbuf(io.png)))
    throw std::runtime_error("png write error: " + path);
  png_set_IHDR(io.png, io.info, p.w, p.h, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(io.png, io.info);
  std::vector<uint8_t> row(p.w);
  for (int y = 0; y < p.h; ++y) {
    for (int x = 0; x < p.w; ++x) row[x] = quant8(p.at(y, x) * 255.0);
    png_write_row(io.png, row.data());
  }
  png_write_end(io.png, nullptr);
}

Plane read_png_gray(const std::string& path) {
  RgbImage img = read_png_rgb(path);
  Plane p(img.height(), img.width());
  for (size_t i = 0; i < p.v.size(); ++i)
    p.v[i] = (0.299 * img.r.v[i] + 0.587 * img.g.v[i] + 0.114 * img.b.v[i]) / 255.0;
  return p;
}

void write_kv_file(const std::string& path, const KvPairs& kv) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
}

KvPairs read_kv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  KvPairs kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ": malformed line: " + line);
    kv.push_back({line.substr(0, eq), line.substr(eq + 1)});
  }
  return kv;
}

void save_checkpoint(const std::string& dir, const WsidModel& m) {
  fs::create_directories(dir);
  KvPairs meta;
  meta.push_back({"format", "1"});
  meta.push_back({"use_da", m.use_da ? "1" : "0"});
  meta.push_back({"use_be", m.use_be ? "1" : "0"});
  for (const auto& [name, t] : named_params(m)) {
    std::string file = name;
    std::replace(file.begin(), file.end(), '.', '_');
    file += ".wsid";
    write_tensor_file((fs::path(dir) / file).string(), t);
    meta.push_back({"param." + name, file});
  }
  write_kv_file((fs::path(dir) / "params.txt").string(), meta);
}

WsidModel load_checkpoint(const std::string& dir) {
  const KvPairs meta = read_kv_file((fs::path(dir) / "params.txt").string());
  std::map<std::string, std::string> kv(meta.begin(), meta.end());
  if (kv["format"] != "1")
    throw std::runtime_error(dir + ": unsupported checkpoint format");
  const bool use_da = kv["use_da"] == "1";
  const bool use_be = kv["use_be"] == "1";

  WsidModel m = model_init(0, use_da, use_be);
  for (auto& [name, t] : named_params(m)) {
    const auto it = kv.find("param." + name);
    if (it == kv.end())
      throw std::runtime_error(dir + ": checkpoint missing parameter " + name);
    Tensor loaded = read_tensor_file((fs::path(dir) / it->second).string());
    if (loaded.shape() != t.shape())
      throw std::runtime_error(dir + ": parameter " + name + " has shape " +
                               shape_str(loaded.shape()) + ", expected " +
                               shape_str(t.shape()));
    t.data() = loaded.data();
  }
  return m;
}

void write_dataset(const std::string& dir, const std::vector<DatasetEntry>& entries,
                   uint64_t seed) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "gt");
  fs::create_directories(fs::path(dir) / "pseudo");

  KvPairs manifest;
  manifest.push_back({"count", std::to_string(entries.size())});
  manifest.push_back({"seed", std::to_string(seed)});
  for (const auto& e : entries) {
    write_png_rgb((fs::path(dir) / "images" / (e.id + ".png")).string(), e.sample.image);

    LabelMap labels(e.sample.height, e.sample.width);
    const auto lv = labels_from_instances(e.sample.gt_instances, e.sample.height,
                                          e.sample.width);
    labels.v = lv;
    write_label_png((fs::path(dir) / "gt" / (e.id + ".png")).string(), labels);

    const fs::path pseudo = fs::path(dir) / "pseudo";
    write_plane_file((pseudo / (e.id + "_cam.wsid")).string(), e.pseudo.cam);
    write_plane_file((pseudo / (e.id + "_sal.wsid")).string(), e.pseudo.saliency);
    write_plane_file((pseudo / (e.id + "_bnd.wsid")).string(), e.pseudo.boundary);
    write_tensor_file((pseudo / (e.id + "_off.wsid")).string(),
                      offsets_tensor(e.pseudo.off_x, e.pseudo.off_y));

    std::string classes;
    for (size_t k = 0; k < e.sample.class_ids.size(); ++k) {
      if (k) classes += ",";
      classes += shape_class_name(e.sample.class_ids[k]);
    }
    manifest.push_back({"scene." + e.id + ".t_star", std::to_string(e.sample.t_star)});
    manifest.push_back({"scene." + e.id + ".classes", classes});
  }
  write_kv_file((fs::path(dir) / "manifest.txt").string(), manifest);
}

std::vector<LoadedScene> load_dataset(const std::string& dir) {
  const KvPairs manifest = read_kv_file((fs::path(dir) / "manifest.txt").string());
  std::vector<std::string> ids;
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : manifest) {
    kv[k] = v;
    const std::string prefix = "scene.";
    const std::string suffix = ".t_star";
    if (k.size() > prefix.size() + suffix.size() && k.rfind(prefix, 0) == 0 &&
        k.compare(k.size() - suffix.size(), suffix.size(), suffix) == 0)
      ids.push_back(k.substr(prefix.size(), k.size() - prefix.size() - suffix.size()));
  }

  std::vector<LoadedScene> scenes;
  scenes.reserve(ids.size());
  for (const auto& id : ids) {
    LoadedScene s;
    s.id = id;
    s.image = read_png_rgb((fs::path(dir) / "images" / (id + ".png")).string());
    s.gt_labels = read_label_png((fs::path(dir) / "gt" / (id + ".png")).string());

    int max_label = 0;
    for (int v : s.gt_labels.v) max_label = std::max(max_label, v);
    s.gt_instances.assign(max_label, Plane(s.gt_labels.h, s.gt_labels.w));
    for (size_t i = 0; i < s.gt_labels.v.size(); ++i)
      if (s.gt_labels.v[i] > 0) s.gt_instances[s.gt_labels.v[i] - 1].v[i] = 1.0;

    const fs::path pseudo = fs::path(dir) / "pseudo";
    s.pseudo_cam = read_plane_file((pseudo / (id + "_cam.wsid")).string());
    s.pseudo_sal = read_plane_file((pseudo / (id + "_sal.wsid")).string());
    s.pseudo_bnd = read_plane_file((pseudo / (id + "_bnd.wsid")).string());
    Tensor off = read_tensor_file((pseudo / (id + "_off.wsid")).string());
    if (off.ndim() != 3 || off.dim(0) != 2)
      throw std::runtime_error(dir + ": offsets for " + id +
                               " must be [2,H,W], got " + shape_str(off.shape()));
    s.off_x = Plane(off.dim(1), off.dim(2));
    s.off_y = Plane(off.dim(1), off.dim(2));
    const long long hw = (long long)off.dim(1) * off.dim(2);
    std::copy(off.data().begin(), off.data().begin() + hw, s.off_x.v.begin());
    std::copy(off.data().begin() + hw, off.data().end(), s.off_y.v.begin());

    s.t_star = std::stoi(kv.at("scene." + id + ".t_star"));
    std::stringstream cls(kv.at("scene." + id + ".classes"));
    std::string tok;
    while (std::getline(cls, tok, ',')) s.class_names.push_back(tok);
    scenes.push_back(std::move(s));
  }
  return scenes;
}

TrainSample train_sample_from_scene(const LoadedScene& scene) {
  TrainSample t;
  t.image = tensor_from_rgb(scene.image, 1.0 / 255.0);
  t.pseudo_sal = scene.pseudo_sal;
  t.pseudo_bnd = scene.pseudo_bnd;
  t.off_x = scene.off_x;
  t.off_y = scene.off_y;
  t.t_star = scene.t_star;
  return t;
}

void write_detections_txt(const std::string& path,
                          const std::vector<Detection>& dets) {
  KvPairs kv;
  kv.push_back({"count", std::to_string(dets.size())});
  for (size_t i = 0; i < dets.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", dets[i].score);
    kv.push_back({"det." + std::to_string(i + 1) + ".score", buf});
  }
  write_kv_file(path, kv);
}

std::vector<double> read_detection_scores(const std::string& path) {
  const KvPairs kv = read_kv_file(path);
  std::vector<double> scores;
  for (const auto& [k, v] : kv)
    if (k.rfind("det.", 0) == 0 && k.size() > 10 &&
        k.compare(k.size() - 6, 6, ".score") == 0)
      scores.push_back(std::stod(v));
  return scores;
}

RgbImage overlay_labels(const RgbImage& image, const LabelMap& labels) {
  static const double palette[6][3] = {{230, 60, 60},  {60, 200, 90},
                                       {70, 100, 235}, {235, 200, 60},
                                       {200, 80, 220}, {70, 210, 210}};
  RgbImage out = image;
  for (size_t i = 0; i < labels.v.size(); ++i) {
    const int lab = labels.v[i];
    if (!lab) continue;
    const double* c = palette[(lab - 1) % 6];
    out.r.v[i] = 0.45 * out.r.v[i] + 0.55 * c[0];
    out.g.v[i] = 0.45 * out.g.v[i] + 0.55 * c[1];
    out.b.v[i] = 0.45 * out.b.v[i] + 0.55 * c[2];
  }
  return out;
}

}  // namespace wsid
