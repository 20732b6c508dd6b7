#pragma once

#include <algorithm>
#include <stdexcept>

namespace iassl {

// Axis-aligned box, corner + size, normalized to the unit square.
struct BoundingBox {
  double x = 0.0;  // left edge, [0,1]
  double y = 0.0;  // top edge, [0,1]
  double w = 0.0;  // width, (0,1]
  double h = 0.0;  // height, (0,1]

  bool valid() const {
    return w > 0.0 && h > 0.0 && x >= 0.0 && y >= 0.0 && x + w <= 1.0 + 1e-9 &&
           y + h <= 1.0 + 1e-9;
  }

  double area() const { return w * h; }

  bool operator==(const BoundingBox&) const = default;
};

inline void check_box(const BoundingBox& b, const char* what) {
  if (!b.valid()) throw std::invalid_argument(std::string(what) + ": invalid bounding box");
}

// Intersection over union; 0 for disjoint boxes.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

}  // namespace iassl
