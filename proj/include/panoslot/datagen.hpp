/* Copyright 2026 The Panoslot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef PANOSLOT_DATAGEN_HPP_
#define PANOSLOT_DATAGEN_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "panoslot/panoptic.hpp"
#include "panoslot/tensor.hpp"

namespace panoslot {

// 8-bit interleaved RGB image.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(std::size_t h, std::size_t w) : height(h), width(w), rgb(h * w * 3, 0) {}
  std::uint8_t* at(std::size_t y, std::size_t x) { return &rgb[(y * width + x) * 3]; }
  const std::uint8_t* at(std::size_t y, std::size_t x) const {
    return &rgb[(y * width + x) * 3];
  }
  bool operator==(const Image&) const = default;
};

using Color = std::array<std::uint8_t, 3>;

enum class ShapeType { kDisc, kRect, kTriangle };

const char* shape_name(ShapeType s);
ShapeType shape_from_name(const std::string& name);

// A moving thing. Position is the shape center at frame 0 in pixels;
// velocity is in pixels per frame. `size` is the radius for discs and the
// half-extent for rectangles and triangles.
struct ThingSpec {
  ShapeType shape = ShapeType::kDisc;
  std::uint32_t class_id = 0;
  double cx = 0, cy = 0;
  double size = 6;
  double aspect = 1.0;  // rectangles: half-height = size * aspect
  double vx = 0, vy = 0;
  Color color{255, 255, 255};
};

// Horizontal stuff band covering rows [top, bottom).
struct StuffBand {
  std::uint32_t class_id = 0;
  std::size_t top = 0, bottom = 0;
  Color color{0, 0, 0};
};

struct SceneSpec {
  std::size_t height = 48, width = 48, frames = 6;
  std::vector<StuffBand> bands;
  // Drawn in order, later things occlude earlier ones.
  std::vector<ThingSpec> things;
  int noise = 8;  // uniform per-pixel color noise amplitude
  std::uint64_t seed = 0;

  // Throws ConfigError when a band layout does not tile the frame, a thing
  // keeps less than 60% of its area in frame at any time, or moves more
  // than 15% of the frame width per frame.
  void validate() const;
};

// Knobs for random scene sampling.
struct GeneratorConfig {
  std::size_t height = 48, width = 48, frames = 6;
  std::size_t min_things = 1, max_things = 4;
  std::size_t num_thing_classes = 3, num_stuff_classes = 3;
  std::size_t stuff_bands = 2;
  double min_size = 5, max_size = 8;
  // Maximum per-frame displacement as a fraction of the frame width.
  double max_speed = 0.06;
  // Largest fraction of a thing's in-frame area that others may cover.
  double max_occlusion = 0.5;
  int noise = 8;

  void validate() const;
};

struct Clip {
  std::vector<Image> frames;
  std::vector<PanopticFrame> annotations;
  SceneSpec spec;
  std::size_t num_thing_classes = 3, num_stuff_classes = 3;

  std::size_t size() const { return frames.size(); }
  bool operator==(const Clip& o) const {
    return frames == o.frames && annotations == o.annotations;
  }
};

// Fixed class palette: things use class % 3 for the shape.
ShapeType thing_shape(std::uint32_t class_id);
Color thing_color(std::uint32_t class_id);
Color stuff_color(std::uint32_t stuff_index);

// Area fraction of a thing that lies in frame at frame t.
double visible_fraction(const ThingSpec& t, std::size_t height, std::size_t width,
                        std::size_t frame);
// Whether pixel (y, x) center is inside the thing at frame t.
bool thing_covers(const ThingSpec& t, std::size_t frame, double y, double x);

// Samples a scene satisfying cfg by rejection; deterministic in seed.
SceneSpec sample_scene(const GeneratorConfig& cfg, std::uint64_t seed);

// Renders frames and exact id maps (no anti-aliasing). Stuff segments get
// ids 1..bands, things bands+1.. with track id index+1; fully hidden things
// have no record in that frame.
Clip generate_clip(const SceneSpec& spec, std::size_t num_thing_classes = 3,
                   std::size_t num_stuff_classes = 3);

// Similarity transform about the frame center: source = (p - c - t) / s + c.
struct FrameTransform {
  double scale = 1.0;
  double tx = 0.0, ty = 0.0;
};

// Warps an image bilinearly and its id map by nearest neighbor. Pixels
// mapping outside the source become void (black in the image).
void warp_frame(const Image& image, const PanopticFrame& annotation,
                const FrameTransform& tf, Image& out_image,
                PanopticFrame& out_annotation);

struct SimulateConfig {
  std::size_t frames = 2;
  double scale_min = 0.9, scale_max = 1.1;
  // Maximum translation per frame as a fraction of the frame width.
  double translate = 0.05;

  void validate() const;
};

// Applies the given per-frame transforms to one annotated frame. Throws
// ConfigError if a transform leaves no labeled pixel.
Clip simulate_clip(const Image& image, const PanopticFrame& annotation,
                   const std::vector<FrameTransform>& transforms);

// Samples a linear scale/translate trajectory starting at the identity and
// applies it.
Clip simulate_clip_from_image(const Image& image, const PanopticFrame& annotation,
                              const SimulateConfig& cfg, std::uint64_t seed);

// [H, W, 3] network input in [-1, 1].
template <typename S>
Tensor<S> image_to_tensor(const Image& image);

// Netpbm I/O: binary P6 (8-bit RGB) and 16-bit binary P5.
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);
void write_pgm16(const std::filesystem::path& path, std::size_t height,
                 std::size_t width, const std::vector<std::uint16_t>& values);
std::vector<std::uint16_t> read_pgm16(const std::filesystem::path& path,
                                      std::size_t& height, std::size_t& width);

// One directory per clip: frame_%04d.ppm, seg_%04d.pgm, clip.json.
void write_clip(const std::filesystem::path& dir, const Clip& clip);
Clip read_clip(const std::filesystem::path& dir);

struct DatasetEntry {
  std::string name;
  std::uint64_t seed = 0;
};

// Generates `count` clips with seeds base_seed + i under `dir` and writes
// manifest.json. Returns the entries in order.
std::vector<DatasetEntry> generate_dataset(const std::filesystem::path& dir,
                                           const GeneratorConfig& cfg,
                                           std::size_t count,
                                           std::uint64_t base_seed);
std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dir);
std::vector<Clip> load_dataset(const std::filesystem::path& dir);

}  // namespace panoslot

#endif  // PANOSLOT_DATAGEN_HPP_
