#pragma once

// File formats: the "WSID" binary tensor container (float32 little-endian),
// 8-bit RGB / 16-bit label PNGs, line-oriented key=value manifests, and the
// checkpoint / dataset directory layouts.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wsid/detection.hpp"
#include "wsid/net.hpp"
#include "wsid/plane.hpp"
#include "wsid/synth.hpp"
#include "wsid/tensor.hpp"

namespace wsid {

// magic "WSID" | version u32=1 | ndim u32 | dims u32[ndim] | float32 payload,
// all little-endian, row-major. Doubles are quantized to float32 on write.
void write_tensor_file(const std::string& path, const Tensor& t);
Tensor read_tensor_file(const std::string& path);

void write_plane_file(const std::string& path, const Plane& p);  // shape [H,W]
Plane read_plane_file(const std::string& path);

// PNG (libpng behind the scenes; fixed settings so outputs are
// byte-reproducible). Images are clamped/rounded to integer channels.
void write_png_rgb(const std::string& path, const RgbImage& img);
RgbImage read_png_rgb(const std::string& path);

// 16-bit grayscale instance labels: 0 background, k = instance k.
void write_label_png(const std::string& path, const LabelMap& labels);
LabelMap read_label_png(const std::string& path);

// 8-bit grayscale from a [0,1] plane.
void write_png_gray(const std::string& path, const Plane& p);
Plane read_png_gray(const std::string& path);

// Line-oriented `key=value` text.
using KvPairs = std::vector<std::pair<std::string, std::string>>;
void write_kv_file(const std::string& path, const KvPairs& kv);
KvPairs read_kv_file(const std::string& path);

// --------------------------------------------------------------------------
// Checkpoints: a directory with params.txt (meta + name=file lines) and one
// tensor file per parameter.
void save_checkpoint(const std::string& dir, const WsidModel& m);
WsidModel load_checkpoint(const std::string& dir);

// --------------------------------------------------------------------------
// Dataset directory written by the synth command:
//   manifest.txt, images/NNNN.png, gt/NNNN.png (16-bit labels),
//   pseudo/NNNN_{cam,sal,bnd,off}.wsid
struct DatasetEntry {
  std::string id;
  SceneSample sample;
  PseudoMaps pseudo;
};

void write_dataset(const std::string& dir, const std::vector<DatasetEntry>& entries,
                   uint64_t seed);

struct LoadedScene {
  std::string id;
  RgbImage image;
  LabelMap gt_labels;
  std::vector<Plane> gt_instances;
  Plane pseudo_sal, pseudo_bnd, pseudo_cam;
  Plane off_x, off_y;
  int t_star = 0;
  std::vector<std::string> class_names;
};

std::vector<LoadedScene> load_dataset(const std::string& dir);

TrainSample train_sample_from_scene(const LoadedScene& scene);

// Per-image detection manifest (score per instance label) used next to
// prediction label PNGs.
void write_detections_txt(const std::string& path,
                          const std::vector<Detection>& dets);
std::vector<double> read_detection_scores(const std::string& path);

// Color overlay of instance masks for quick human inspection.
RgbImage overlay_labels(const RgbImage& image, const LabelMap& labels);

}  // namespace wsid
