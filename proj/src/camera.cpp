#include "texrec/camera.h"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace texrec {

void Camera::validate() const {
  if (fx <= 0 || fy <= 0) throw std::invalid_argument("camera: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera: image size must be positive");
  const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
  if ((rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6)
    throw std::invalid_argument("camera: rotation is not orthonormal");
}

Camera Camera::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("camera: cannot open " + path);
  nlohmann::json j;
  in >> j;

  Camera cam;
  cam.fx = j.at("fx").get<double>();
  cam.fy = j.at("fy").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  const auto& r = j.at("rotation");
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) cam.rotation(i, k) = r.at(i).at(k).get<double>();
  const auto& t = j.at("translation");
  for (int i = 0; i < 3; ++i) cam.translation(i) = t.at(i).get<double>();
  cam.validate();
  return cam;
}

void Camera::save_json(const std::string& path) const {
  nlohmann::ordered_json j;
  j["fx"] = fx;
  j["fy"] = fy;
  j["cx"] = cx;
  j["cy"] = cy;
  j["width"] = width;
  j["height"] = height;
  j["rotation"] = {{rotation(0, 0), rotation(0, 1), rotation(0, 2)},
                   {rotation(1, 0), rotation(1, 1), rotation(1, 2)},
                   {rotation(2, 0), rotation(2, 1), rotation(2, 2)}};
  j["translation"] = {translation(0), translation(1), translation(2)};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("camera: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace texrec
