#ifndef IADG_LABELS_HPP_
#define IADG_LABELS_HPP_

#include <cstdint>
#include <string>

namespace iadg {

enum class ClassLabel : std::uint8_t { spoof = 0, real = 1 };

inline const char* to_string(ClassLabel c) { return c == ClassLabel::real ? "real" : "spoof"; }
inline double label_value(ClassLabel c) { return c == ClassLabel::real ? 1.0 : 0.0; }

}  // namespace iadg

#endif  // IADG_LABELS_HPP_
