#pragma once

#include <algorithm>
#include <random>

#include "ap_oracle.hpp"
#include "zoomdet/eval.hpp"
#include "zoomdet/rng.hpp"

namespace testutil {

struct EvalInstance {
  oracle::Frames gt;
  oracle::DetFrames det;
  zoomdet::GroundTruthSet gt_set;
  zoomdet::DetectionSet det_set;
};

// Detections are jittered copies of ground truth plus clutter; confidences are
// continuous so rank ties have probability zero.
inline EvalInstance random_instance(zoomdet::Rng& rng, int n_classes = 2, int max_frames = 6,
                                    int max_objects = 6, std::size_t max_detections = 1000) {
  using zoomdet::uniform;
  using zoomdet::uniform_int;
  EvalInstance inst;
  const int frames = uniform_int(rng, 1, max_frames);
  for (int f = 0; f < frames; ++f) {
    const auto id = static_cast<std::uint64_t>(f * 3 + uniform_int(rng, 0, 2));
    auto& g = inst.gt[id];
    auto& d = inst.det[id];
    const int n_obj = uniform_int(rng, 0, max_objects);
    for (int i = 0; i < n_obj; ++i) {
      const oracle::Box b{uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.02, 0.3),
                          uniform(rng, 0.02, 0.3)};
      const int cls = uniform_int(rng, 0, n_classes - 1);
      g.push_back({cls, b});
      const int copies = uniform_int(rng, 0, 2);
      for (int c = 0; c < copies; ++c) {
        const double j = uniform(rng, 0.0, 0.5);
        d.push_back({cls,
                     {b.cx + uniform(rng, -j, j) * b.w, b.cy + uniform(rng, -j, j) * b.h,
                      b.w * uniform(rng, 1 - j, 1 + j), b.h * uniform(rng, 1 - j, 1 + j)},
                     uniform(rng, 0.0, 1.0)});
      }
    }
    const int clutter = uniform_int(rng, 0, 3);
    for (int i = 0; i < clutter; ++i)
      d.push_back({uniform_int(rng, 0, n_classes - 1),
                   {uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.02, 0.3), uniform(rng, 0.02, 0.3)},
                   uniform(rng, 0.0, 1.0)});
    if (d.size() > max_detections) {
      std::shuffle(d.begin(), d.end(), rng);
      d.resize(max_detections);
    }
  }
  for (const auto& [id, objs] : inst.gt) {
    zoomdet::GroundTruthFrame f{id, 640, 480, {}};
    for (const auto& o : objs) f.objects.push_back({o.cls, {o.box.cx, o.box.cy, o.box.w, o.box.h}});
    inst.gt_set.frames[id] = f;
  }
  for (const auto& [id, dets] : inst.det)
    for (const auto& d : dets)
      inst.det_set.frames[id].push_back({d.cls, {d.box.cx, d.box.cy, d.box.w, d.box.h}, d.conf});
  return inst;
}

}  // namespace testutil
