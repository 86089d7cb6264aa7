#ifndef TACTILE_HAND_TAXEL_LAYOUT_HPP_
#define TACTILE_HAND_TAXEL_LAYOUT_HPP_

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "tactile_hand/common.hpp"

namespace tactile_hand {

// Taxel sites on one fingertip pad, in fingertip-local coordinates:
// x along the finger pointing direction, z the outward surface normal at the
// pad center, origin on the pad surface at its center.
//
// The pad is a patch of a cylinder whose axis runs along local x, at distance
// `pad_radius` below the surface. Sites form a grid of `columns` along x
// (spanning `pad_length`) by `rows` around the arc (spanning `pad_arc`).
// Local taxel index = row * columns + column.
struct TaxelLayout {
  int rows = 8;
  int columns = 16;
  double pad_radius = 0.012;
  double pad_arc = 2.0 * kPi / 3.0;
  double pad_length = 0.03;
  double sensing_radius = 0.0015;

  std::vector<Vec3> positions;  // kTaxelsPerFinger entries
  std::vector<Vec3> normals;

  static TaxelLayout make(int rows = 8, int columns = 16,
                          double pad_radius = 0.012,
                          double pad_arc = 2.0 * kPi / 3.0,
                          double pad_length = 0.03,
                          double sensing_radius = 0.0015) {
    TaxelLayout layout;
    layout.rows = rows;
    layout.columns = columns;
    layout.pad_radius = pad_radius;
    layout.pad_arc = pad_arc;
    layout.pad_length = pad_length;
    layout.sensing_radius = sensing_radius;
    if (rows * columns != kTaxelsPerFinger) {
      throw ConfigError("taxel grid must have exactly 128 sites per fingertip");
    }
    layout.positions.reserve(kTaxelsPerFinger);
    layout.normals.reserve(kTaxelsPerFinger);
    for (int r = 0; r < rows; ++r) {
      const double phi = -0.5 * pad_arc + pad_arc * r / (rows - 1);
      for (int c = 0; c < columns; ++c) {
        const double x = -0.5 * pad_length + pad_length * c / (columns - 1);
        layout.positions.emplace_back(x, pad_radius * std::sin(phi),
                                      pad_radius * (std::cos(phi) - 1.0));
        layout.normals.emplace_back(0.0, std::sin(phi), std::cos(phi));
      }
    }
    return layout;
  }

  double column_pitch() const { return pad_length / (columns - 1); }
  double row_pitch() const { return pad_radius * pad_arc / (rows - 1); }

  // Radius of a sphere about the local origin containing every site.
  double bounding_radius() const {
    double r = 0.0;
    for (const auto& p : positions) r = std::max(r, p.norm());
    return r + sensing_radius;
  }

  static int finger_of(int taxel_id) { return taxel_id / kTaxelsPerFinger; }
  static int local_of(int taxel_id) { return taxel_id % kTaxelsPerFinger; }
};

// Taxel CSV rows: taxel id, finger id, x, y, z (meters). Used both for the
// local layout and for world-frame golden files.
inline void write_taxel_csv(std::ostream& out,
                            const std::vector<Vec3>& points_by_taxel_id) {
  out << "taxel_id,finger_id,x,y,z\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < points_by_taxel_id.size(); ++i) {
    const auto& p = points_by_taxel_id[i];
    out << i << ',' << i / kTaxelsPerFinger << ',' << p.x() << ',' << p.y()
        << ',' << p.z() << '\n';
  }
}

inline std::vector<Vec3> read_taxel_csv(std::istream& in) {
  std::vector<Vec3> points;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 5) throw ConfigError("taxel csv: expected 5 columns");
    const auto id = static_cast<std::size_t>(v[0]);
    if (id != points.size()) throw ConfigError("taxel csv: ids out of order");
    points.emplace_back(v[2], v[3], v[4]);
  }
  return points;
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_TAXEL_LAYOUT_HPP_
