#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gcst/types.hpp"

namespace gcst {

struct GenerationParams {
  double temperature = 0.8;
  double top_p = 0.95;
  std::size_t min_length = 64;   // characters; enforced by the backend
  std::size_t max_length = 128;
};

enum class InstructionKind { elaborate, conditional };

inline constexpr const char* kPromptInputPlaceholder = "{input}";

/// Instruction-following wrapper around the task sentence. The elaborate
/// form asks for a free extension of the input; the conditional form steers
/// the generation toward a label description and requires one. The returned
/// template contains kPromptInputPlaceholder where the text goes.
std::string render_instruction(
    InstructionKind kind,
    const std::optional<std::string>& pseudo_label_description = std::nullopt);

std::string assemble_prompt(const std::string& instruction_template,
                            const std::string& input_text);

struct GenerationRequest {
  std::string instruction;  // rendered template, placeholder not yet filled
  std::string input_text;
  GenerationParams params;
  std::size_t n_samples = 1;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::vector<std::string> generate(const GenerationRequest& request) = 0;
};

/// Deterministic stand-in for a hosted model. Output depends only on the
/// request content and the seed, never on call order. Generated texts echo
/// salient input words, and conditional requests end with sentences naming
/// the label, so a bag-of-words encoder measurably shifts toward the
/// conditioned label.
class MockBackend final : public GenerationBackend {
 public:
  explicit MockBackend(std::uint64_t seed) : seed_(seed) {}

  std::vector<std::string> generate(const GenerationRequest& request) override;

  std::uint64_t calls() const { return calls_; }

 private:
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;
};

struct RemoteOptions {
  std::string endpoint;  // e.g. http://host:port
  std::string token_env = "GCST_API_TOKEN";
  int timeout_seconds = 30;
  int max_attempts = 3;
  int initial_backoff_ms = 250;  // doubled per retry
};

/// HTTP client for a hosted generation service. POSTs JSON
/// {prompt, n, temperature, top_p, min_length, max_length} to
/// <endpoint>/generate and expects {"texts": [...]} back. Transport errors
/// are retried with exponential backoff, then surfaced as generation_error.
class RemoteBackend final : public GenerationBackend {
 public:
  explicit RemoteBackend(RemoteOptions options);

  std::vector<std::string> generate(const GenerationRequest& request) override;

 private:
  RemoteOptions options_;
  std::string token_;
};

/// Counts backend invocations; used by the cache-contract tests.
class CountingBackend final : public GenerationBackend {
 public:
  explicit CountingBackend(GenerationBackend& inner) : inner_(&inner) {}

  std::vector<std::string> generate(const GenerationRequest& request) override {
    ++calls_;
    return inner_->generate(request);
  }

  std::uint64_t calls() const { return calls_; }

 private:
  GenerationBackend* inner_;
  std::uint64_t calls_ = 0;
};

/// Cache key: content hash of (document text, label description, kind), so
/// it survives document-id remapping across runs. Input augmentations use an
/// empty label description.
struct GenKey {
  std::string doc_text;
  std::string label_description;  // empty for input augmentation
  AugmentationKind kind = AugmentationKind::input;
};

std::uint64_t gen_key_hash(const GenKey& key);

/// Persistent map from generation key to the generated texts, backed by an
/// append-only record file (see io docs for the exact layout). Lookups after
/// insert return the inserted texts byte-identically, including after a
/// reload. Reads may run concurrently; writes are serialized internally.
class GenDict {
 public:
  GenDict() = default;
  explicit GenDict(std::filesystem::path file);  // replays existing records

  std::optional<AugmentationSet> lookup(const GenKey& key) const;
  void insert(const GenKey& key, const AugmentationSet& set);

  std::size_t size() const;
  const std::filesystem::path& path() const { return file_; }

 private:
  struct Entry {
    AugmentationKind kind;
    int label = -1;
    std::vector<std::string> texts;
  };

  mutable std::mutex mutex_;
  std::filesystem::path file_;
  std::unordered_map<std::uint64_t, Entry> entries_;
};

/// K elaborations of the document, cached under (text, input). Repeated
/// calls cost zero backend invocations; a failed generation caches nothing.
AugmentationSet generate_input_augs(const Document& doc, std::size_t k,
                                    GenerationBackend& backend, GenDict& cache,
                                    const GenerationParams& params = {});

/// M generations conditioned on the pseudo-label, cached under
/// (text, label description, conditional); a different label for the same
/// document is a distinct key.
AugmentationSet generate_conditional_augs(const Document& doc,
                                          int pseudo_label,
                                          const std::string& label_description,
                                          std::size_t m,
                                          GenerationBackend& backend,
                                          GenDict& cache,
                                          const GenerationParams& params = {});

}  // namespace gcst
