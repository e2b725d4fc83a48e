#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace stancekit {

// The five perception/behavior classes. The enum order is the canonical
// label order used for logits, confusion matrices and tie-breaking.
enum class ClassLabel : std::uint8_t {
  kSympathy = 0,
  kAntipathy = 1,
  kSolidarity = 2,
  kAnimosity = 3,
  kGeneric = 4,
};

inline constexpr std::size_t kNumClasses = 5;

inline constexpr std::array<ClassLabel, kNumClasses> kLabelOrder = {
    ClassLabel::kSympathy, ClassLabel::kAntipathy, ClassLabel::kSolidarity,
    ClassLabel::kAnimosity, ClassLabel::kGeneric};

constexpr std::size_t index_of(ClassLabel label) {
  return static_cast<std::size_t>(label);
}

constexpr ClassLabel label_at(std::size_t index) {
  return kLabelOrder.at(index);
}

// Short code: SYM, ANT, SOL, ANM, GEN.
std::string_view to_code(ClassLabel label);

// Long name: Sympathy, Antipathy, ...
std::string_view to_name(ClassLabel label);

// Accepts the short codes and the long names, case-insensitively.
std::optional<ClassLabel> parse_label(std::string_view text);

// Same as parse_label but throws a validation Error naming the input.
ClassLabel require_label(std::string_view text);

// Per-class container indexed by ClassLabel.
template <typename T>
struct PerClass {
  std::array<T, kNumClasses> values{};

  T& operator[](ClassLabel label) { return values[index_of(label)]; }
  const T& operator[](ClassLabel label) const { return values[index_of(label)]; }

  auto begin() { return values.begin(); }
  auto end() { return values.end(); }
  auto begin() const { return values.begin(); }
  auto end() const { return values.end(); }

  friend bool operator==(const PerClass&, const PerClass&) = default;
};

}  // namespace stancekit
