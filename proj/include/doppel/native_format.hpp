#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "doppel/architectures.hpp"

namespace doppel {

struct NativeMetadata {
  std::string primal_family;
  MappingStrategy strategy = MappingStrategy::exact;
  std::uint64_t seed = 0;
  TrainConfig train_config;
  Task task = Task::classification;
  std::string registry_version = "default";
  /// Feature standardization the model expects, when one was applied.
  std::optional<std::vector<double>> scaler_means;
  std::optional<std::vector<double>> scaler_stds;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;

  friend bool operator==(const NativeMetadata&, const NativeMetadata&) = default;
};

/// JSON weight document. Weights are float64 nested lists keyed by block name.
struct NativeModelDoc {
  static constexpr int kFormatVersion = 1;

  ProxyDescriptor descriptor;
  std::vector<ParamBlock> weights;
  NativeMetadata metadata;
};

std::string descriptor_to_json(const ProxyDescriptor& desc);
ProxyDescriptor descriptor_from_json(std::string_view text);

std::string to_json(const NativeModelDoc& doc);
/// Throws ParseError on malformed JSON, InputError or DimensionError on
/// content that does not describe a valid proxy.
NativeModelDoc native_from_json(std::string_view text);

void save_native(const NativeModelDoc& doc, const std::string& path);
NativeModelDoc load_native(const std::string& path);

/// Fitted classical model as JSON.
/// Fitted classical model as JSON, with the optional feature scaler it was
/// trained behind.
std::string primal_to_json(const PrimalModel& model, const Scaler* scaler = nullptr);
PrimalModel primal_from_json(std::string_view text, std::optional<Scaler>* scaler = nullptr);

/// Distinguishes the two documents: "proxy", "primal" or "" for neither.
std::string document_kind(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view contents);

}  // namespace doppel
