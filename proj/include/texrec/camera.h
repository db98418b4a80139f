#pragma once

#include <Eigen/Dense>
#include <string>

namespace texrec {

/// Pinhole camera, OpenCV-style axes: +x right, +y down, +z forward.
/// Projection yields continuous pixel coordinates where pixel (i, j)
/// covers [i, i+1) x [j, j+1).
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  int width = 0, height = 0;

  Eigen::Vector3d to_camera(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  /// Projects a camera-space point; caller checks z > 0.
  Eigen::Vector2d project_camera(const Eigen::Vector3d& pc) const {
    return {fx * pc.x() / pc.z() + cx, fy * pc.y() / pc.z() + cy};
  }

  Eigen::Vector2d project(const Eigen::Vector3d& p) const {
    return project_camera(to_camera(p));
  }

  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

  /// Throws std::invalid_argument on a non-orthonormal rotation or
  /// non-positive focal lengths / image size.
  void validate() const;

  static Camera load_json(const std::string& path);
  void save_json(const std::string& path) const;
};

}  // namespace texrec
