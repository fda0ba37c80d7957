/*
 * Copyright (C) 2026 The voxsplat authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "voxsplat/scene.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "voxsplat/checkpoint.hpp"

namespace voxsplat {

namespace {

constexpr double kRayEps = 1e-9;

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d albedo = Eigen::Vector3d::Zero();
  bool valid() const { return std::isfinite(t); }
};

void plane_hit(const SceneSpec& spec, const Eigen::Vector3d& o, const Eigen::Vector3d& d, Hit& best) {
  if (!spec.plane_enabled || std::fabs(d.z()) < 1e-14) return;
  const double t = -o.z() / d.z();
  if (t <= kRayEps || t >= best.t) return;
  const Eigen::Vector3d p = o + t * d;
  const auto cellf = [&](double v) {
    return static_cast<long long>(std::floor(v / spec.plane_cell));
  };
  const bool even = ((cellf(p.x()) + cellf(p.y())) % 2 + 2) % 2 == 0;
  best.t = t;
  best.normal = Eigen::Vector3d::UnitZ();
  best.albedo = even ? spec.plane_color_a : spec.plane_color_b;
}

void sphere_hit(const SceneObject& obj, double time, const Eigen::Vector3d& o,
                const Eigen::Vector3d& d, Hit& best) {
  const Eigen::Vector3d c = obj.center_at(time);
  const Eigen::Vector3d oc = o - c;
  const double r = obj.radius();
  const double a = d.squaredNorm();
  const double b = 2.0 * oc.dot(d);
  const double cc = oc.squaredNorm() - r * r;
  const double disc = b * b - 4 * a * cc;
  if (disc < 0) return;
  const double sq = std::sqrt(disc);
  double t = (-b - sq) / (2 * a);
  if (t <= kRayEps) t = (-b + sq) / (2 * a);
  if (t <= kRayEps || t >= best.t) return;
  best.t = t;
  best.normal = (o + t * d - c).normalized();
  best.albedo = obj.albedo;
}

void box_hit(const SceneObject& obj, double time, const Eigen::Vector3d& o,
             const Eigen::Vector3d& d, Hit& best) {
  const Eigen::Vector3d c = obj.center_at(time);
  const Eigen::Vector3d lo = c - obj.half_extent, hi = c + obj.half_extent;
  double t0 = kRayEps, t1 = best.t;
  int axis0 = -1;
  double sign0 = 0;
  for (int ax = 0; ax < 3; ++ax) {
    if (std::fabs(d[ax]) < 1e-14) {
      if (o[ax] < lo[ax] || o[ax] > hi[ax]) return;
      continue;
    }
    double ta = (lo[ax] - o[ax]) / d[ax];
    double tb = (hi[ax] - o[ax]) / d[ax];
    double sgn = -1;
    if (ta > tb) {
      std::swap(ta, tb);
      sgn = 1;
    }
    if (ta > t0) {
      t0 = ta;
      axis0 = ax;
      sign0 = sgn;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return;
  }
  if (axis0 < 0) return;  // origin inside the box; skip
  best.t = t0;
  best.normal = Eigen::Vector3d::Zero();
  best.normal[axis0] = sign0;
  best.albedo = obj.albedo;
}

Camera make_ring_camera(const SceneSpec& spec, int index, double time) {
  const double angle = 2.0 * M_PI * index / std::max(1, spec.rig_count);
  const Eigen::Vector3d drift = spec.rig_velocity * time;
  const Eigen::Vector3d pos =
      Eigen::Vector3d(spec.rig_radius * std::cos(angle), spec.rig_radius * std::sin(angle),
                      spec.rig_height) +
      drift;
  const Eigen::Vector3d target = spec.rig_target + drift;

  Eigen::Vector3d forward = (target - pos).normalized();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  if (std::fabs(forward.dot(up)) > 0.999) up = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right).normalized();

  Camera cam;
  cam.intrinsics.width = spec.image_width;
  cam.intrinsics.height = spec.image_height;
  cam.intrinsics.fx = 0.5 * spec.image_width / std::tan(0.5 * spec.fov_deg * M_PI / 180.0);
  cam.intrinsics.fy = cam.intrinsics.fx;
  cam.intrinsics.cx = 0.5 * spec.image_width;
  cam.intrinsics.cy = 0.5 * spec.image_height;
  cam.pose.rotation.row(0) = right;
  cam.pose.rotation.row(1) = down;
  cam.pose.rotation.row(2) = forward;
  cam.pose.translation = -cam.pose.rotation * pos;
  return cam;
}

}  // namespace

void SceneSpec::validate() const {
  if (dt <= 0) throw std::invalid_argument("scene: dt must be positive");
  if (rig_count < 1) throw std::invalid_argument("scene: need at least one camera");
  if (frame_count < 1) throw std::invalid_argument("scene: need at least one frame");
  if (image_width < 8 || image_height < 8) throw std::invalid_argument("scene: image too small");
  if (plane_cell <= 0) throw std::invalid_argument("scene: plane cell must be positive");
  const Eigen::Vector3d lo = grid.origin, hi = grid.max_corner();
  for (const SceneObject& obj : objects) {
    for (int ax = 0; ax < 3; ++ax) {
      if (obj.half_extent[ax] <= 0) throw std::invalid_argument("scene: object extent must be positive");
      if (obj.center[ax] < lo[ax] || obj.center[ax] > hi[ax]) {
        throw std::invalid_argument("scene: object center outside the declared grid extent");
      }
    }
  }
}

SceneSpec SceneSpec::from_config(const KeyValueConfig& cfg) {
  SceneSpec s;
  auto vec3 = [&](const std::string& key, const Eigen::Vector3d& fb) {
    const std::vector<double> v = cfg.get_doubles(key, {fb.x(), fb.y(), fb.z()});
    if (v.size() != 3) throw std::runtime_error("config: key '" + key + "' needs 3 values");
    return Eigen::Vector3d(v[0], v[1], v[2]);
  };
  s.plane_enabled = cfg.get_bool("plane.enabled", s.plane_enabled);
  s.plane_cell = cfg.get_double("plane.cell", s.plane_cell);
  s.plane_color_a = vec3("plane.color_a", s.plane_color_a);
  s.plane_color_b = vec3("plane.color_b", s.plane_color_b);
  s.rig_count = static_cast<int>(cfg.get_int("rig.count", s.rig_count));
  s.rig_radius = cfg.get_double("rig.radius", s.rig_radius);
  s.rig_height = cfg.get_double("rig.height", s.rig_height);
  s.rig_target = vec3("rig.target", s.rig_target);
  s.rig_velocity = vec3("rig.velocity", s.rig_velocity);
  s.image_width = static_cast<int>(cfg.get_int("image.width", s.image_width));
  s.image_height = static_cast<int>(cfg.get_int("image.height", s.image_height));
  s.fov_deg = cfg.get_double("camera.fov_deg", s.fov_deg);
  s.frame_count = static_cast<int>(cfg.get_int("frames", s.frame_count));
  s.dt = cfg.get_double("dt", s.dt);
  s.seed = static_cast<uint64_t>(cfg.get_int("seed", 0));
  s.light_dir = vec3("light.dir", s.light_dir);
  s.background = vec3("background", s.background);
  s.grid.dims[0] = cfg.get_int("grid.x", s.grid.dims[0]);
  s.grid.dims[1] = cfg.get_int("grid.y", s.grid.dims[1]);
  s.grid.dims[2] = cfg.get_int("grid.z", s.grid.dims[2]);
  s.grid.origin = vec3("grid.origin", s.grid.origin);
  s.grid.voxel_size = vec3("grid.voxel_size", s.grid.voxel_size);

  for (int i = 0;; ++i) {
    const std::string base = "object." + std::to_string(i) + ".";
    if (!cfg.has(base + "type")) break;
    SceneObject obj;
    const std::string type = cfg.get_string(base + "type");
    if (type == "sphere") {
      obj.kind = SceneObject::Kind::Sphere;
      const double r = cfg.get_double(base + "radius", 0.5);
      obj.half_extent = Eigen::Vector3d(r, r, r);
    } else if (type == "box") {
      obj.kind = SceneObject::Kind::Box;
      obj.half_extent = vec3(base + "half_extent", Eigen::Vector3d(0.5, 0.5, 0.5));
    } else {
      throw std::runtime_error("config: unknown object type '" + type + "'");
    }
    obj.center = vec3(base + "center", obj.center);
    obj.albedo = vec3(base + "albedo", obj.albedo);
    obj.velocity = vec3(base + "velocity", obj.velocity);
    s.objects.push_back(obj);
  }
  return s;
}

SceneSequence generate_scene(const SceneSpec& spec) {
  spec.validate();
  SceneSequence seq;
  seq.grid = spec.grid;
  seq.dt = spec.dt;
  const Eigen::Vector3d light = -spec.light_dir.normalized();

  for (int f = 0; f < spec.frame_count; ++f) {
    SceneFrame frame;
    frame.timestamp = f * spec.dt;
    for (int c = 0; c < spec.rig_count; ++c) {
      Camera cam = make_ring_camera(spec, c, frame.timestamp);
      if (f == 0 && c == 0) seq.intrinsics = cam.intrinsics;
      const Intrinsics& K = cam.intrinsics;
      ImageF img = ImageF::zeros(K.width, K.height);
      MapF depth;
      depth.width = K.width;
      depth.height = K.height;
      depth.data.assign(static_cast<size_t>(K.width) * K.height, 0.0f);
      const Eigen::Matrix3d Rt = cam.pose.rotation.transpose();
      const Eigen::Vector3d origin = cam.pose.center();
      for (int y = 0; y < K.height; ++y) {
        for (int x = 0; x < K.width; ++x) {
          // Unit camera-z direction, so the hit parameter is camera depth.
          const Eigen::Vector3d d_cam((x + 0.5 - K.cx) / K.fx, (y + 0.5 - K.cy) / K.fy, 1.0);
          const Eigen::Vector3d d = Rt * d_cam;
          Hit hit;
          plane_hit(spec, origin, d, hit);
          for (const SceneObject& obj : spec.objects) {
            if (obj.kind == SceneObject::Kind::Sphere) {
              sphere_hit(obj, frame.timestamp, origin, d, hit);
            } else {
              box_hit(obj, frame.timestamp, origin, d, hit);
            }
          }
          Eigen::Vector3d rgb = spec.background;
          if (hit.valid()) {
            const double shade = 0.2 + 0.8 * std::max(0.0, hit.normal.dot(light));
            rgb = (hit.albedo * shade).cwiseMin(1.0).cwiseMax(0.0);
            depth.at(x, y) = static_cast<float>(hit.t);
          }
          for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = rgb[ch];
        }
      }
      frame.cameras.push_back(cam);
      frame.images.push_back(std::move(img));
      frame.depths.push_back(std::move(depth));
    }

    // Exact per-voxel velocity: object velocity inside an object, else zero.
    frame.gt_velocity.assign(static_cast<size_t>(spec.grid.cell_count()) * 3, 0.0);
    int64_t vi = 0;
    for (int64_t gx = 0; gx < spec.grid.dims[0]; ++gx)
      for (int64_t gy = 0; gy < spec.grid.dims[1]; ++gy)
        for (int64_t gz = 0; gz < spec.grid.dims[2]; ++gz, ++vi) {
          const Eigen::Vector3d p = spec.grid.cell_center(gx, gy, gz);
          for (const SceneObject& obj : spec.objects) {
            const Eigen::Vector3d rel = p - obj.center_at(frame.timestamp);
            bool inside = false;
            if (obj.kind == SceneObject::Kind::Sphere) {
              inside = rel.norm() <= obj.radius();
            } else {
              inside = (rel.cwiseAbs().array() <= obj.half_extent.array()).all();
            }
            if (inside) {
              for (int ax = 0; ax < 3; ++ax)
                frame.gt_velocity[static_cast<size_t>(vi) * 3 + ax] = obj.velocity[ax];
              break;
            }
          }
        }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

void save_scene(const SceneSequence& seq, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  KeyValueConfig manifest;
  auto num = [](double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
  };
  manifest.set("frames", std::to_string(seq.frames.size()));
  manifest.set("cameras", std::to_string(seq.camera_count()));
  manifest.set("dt", num(seq.dt));
  manifest.set("grid.x", std::to_string(seq.grid.dims[0]));
  manifest.set("grid.y", std::to_string(seq.grid.dims[1]));
  manifest.set("grid.z", std::to_string(seq.grid.dims[2]));
  manifest.set("grid.origin", num(seq.grid.origin.x()) + " " + num(seq.grid.origin.y()) + " " +
                                  num(seq.grid.origin.z()));
  manifest.set("grid.voxel_size", num(seq.grid.voxel_size.x()) + " " + num(seq.grid.voxel_size.y()) +
                                      " " + num(seq.grid.voxel_size.z()));
  const Intrinsics& K = seq.intrinsics;
  manifest.set("intrinsics", num(K.fx) + " " + num(K.fy) + " " + num(K.cx) + " " + num(K.cy) + " " +
                                 std::to_string(K.width) + " " + std::to_string(K.height));

  for (size_t f = 0; f < seq.frames.size(); ++f) {
    const SceneFrame& frame = seq.frames[f];
    const std::string fbase = "frame." + std::to_string(f) + ".";
    manifest.set(fbase + "timestamp", num(frame.timestamp));
    Checkpoint vel;
    vel.tensors["gt_velocity"] = {{seq.grid.dims[0], seq.grid.dims[1], seq.grid.dims[2], 3},
                                  frame.gt_velocity};
    const std::string velname = "frame" + std::to_string(f) + "_velocity.vxs";
    save_checkpoint((fs::path(dir) / velname).string(), vel);
    manifest.set(fbase + "velocity", velname);
    for (size_t c = 0; c < frame.cameras.size(); ++c) {
      const std::string cbase = fbase + "cam." + std::to_string(c) + ".";
      const std::string stem = "frame" + std::to_string(f) + "_cam" + std::to_string(c);
      write_png((fs::path(dir) / (stem + ".png")).string(), frame.images[c]);
      write_pfm((fs::path(dir) / (stem + "_depth.pfm")).string(), frame.depths[c]);
      manifest.set(cbase + "image", stem + ".png");
      manifest.set(cbase + "depth", stem + "_depth.pfm");
      // Stored camera-to-world for human readability; load_scene inverts.
      const Pose c2w = frame.cameras[c].pose.inverse();
      std::string pose_str;
      for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) pose_str += num(c2w.rotation(r, k)) + " ";
      for (int r = 0; r < 3; ++r) pose_str += num(c2w.translation[r]) + (r < 2 ? " " : "");
      manifest.set(cbase + "pose_c2w", pose_str);
    }
  }
  std::ofstream out(std::filesystem::path(dir) / "manifest.txt");
  out << manifest.to_string();
  if (!out) throw std::runtime_error("save_scene: cannot write manifest in " + dir);
}

SceneSequence load_scene(const std::string& dir) {
  namespace fs = std::filesystem;
  const KeyValueConfig m = KeyValueConfig::parse_file((fs::path(dir) / "manifest.txt").string());
  SceneSequence seq;
  const int frames = static_cast<int>(m.get_int("frames"));
  const int cams = static_cast<int>(m.get_int("cameras"));
  seq.dt = m.get_double("dt");
  seq.grid.dims[0] = m.get_int("grid.x");
  seq.grid.dims[1] = m.get_int("grid.y");
  seq.grid.dims[2] = m.get_int("grid.z");
  {
    const auto o = m.get_doubles("grid.origin");
    const auto v = m.get_doubles("grid.voxel_size");
    seq.grid.origin = Eigen::Vector3d(o[0], o[1], o[2]);
    seq.grid.voxel_size = Eigen::Vector3d(v[0], v[1], v[2]);
  }
  const auto intr = m.get_doubles("intrinsics");
  seq.intrinsics.fx = intr[0];
  seq.intrinsics.fy = intr[1];
  seq.intrinsics.cx = intr[2];
  seq.intrinsics.cy = intr[3];
  seq.intrinsics.width = static_cast<int>(intr[4]);
  seq.intrinsics.height = static_cast<int>(intr[5]);

  double prev_ts = -std::numeric_limits<double>::infinity();
  for (int f = 0; f < frames; ++f) {
    const std::string fbase = "frame." + std::to_string(f) + ".";
    SceneFrame frame;
    frame.timestamp = m.get_double(fbase + "timestamp");
    if (frame.timestamp <= prev_ts) {
      throw std::runtime_error("load_scene: timestamps must be strictly increasing");
    }
    prev_ts = frame.timestamp;
    const Checkpoint vel =
        load_checkpoint((fs::path(dir) / m.get_string(fbase + "velocity")).string());
    frame.gt_velocity = vel.tensors.at("gt_velocity").data;
    for (int c = 0; c < cams; ++c) {
      const std::string cbase = fbase + "cam." + std::to_string(c) + ".";
      frame.images.push_back(read_png((fs::path(dir) / m.get_string(cbase + "image")).string()));
      frame.depths.push_back(read_pfm((fs::path(dir) / m.get_string(cbase + "depth")).string()));
      const auto p = m.get_doubles(cbase + "pose_c2w");
      if (p.size() != 12) throw std::runtime_error("load_scene: pose_c2w needs 12 numbers");
      Pose c2w;
      for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) c2w.rotation(r, k) = p[static_cast<size_t>(r * 3 + k)];
      c2w.translation = Eigen::Vector3d(p[9], p[10], p[11]);
      Camera cam;
      cam.intrinsics = seq.intrinsics;
      cam.pose = c2w.inverse();
      frame.cameras.push_back(cam);
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace voxsplat
