#include "gcst/generator.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gcst/rng.hpp"
#include "gcst/tokenizer.hpp"

namespace gcst {

namespace {

constexpr const char* kTemplateHeader =
    "Below is an instruction that describes a task, paired with an input "
    "that provides further context. Write a response that appropriately "
    "completes the request.";

constexpr const char* kElaborateSentence =
    "Elaborate the text in a few sentences.";

std::string conditional_sentence(const std::string& label) {
  return "Discuss the " + label + " aspects of the article.";
}

}  // namespace

std::string render_instruction(
    InstructionKind kind,
    const std::optional<std::string>& pseudo_label_description) {
  std::string sentence;
  if (kind == InstructionKind::elaborate) {
    sentence = kElaborateSentence;
  } else {
    if (!pseudo_label_description || pseudo_label_description->empty()) {
      throw_invalid(
          "render_instruction: conditional generation needs a label "
          "description");
    }
    sentence = conditional_sentence(*pseudo_label_description);
  }
  return std::string(kTemplateHeader) + "\n### Instruction:\n" + sentence +
         "\n### Input:\n" + kPromptInputPlaceholder + "\n### Response:";
}

std::string assemble_prompt(const std::string& instruction_template,
                            const std::string& input_text) {
  const auto pos = instruction_template.find(kPromptInputPlaceholder);
  if (pos == std::string::npos) {
    throw_invalid("assemble_prompt: template lacks the input placeholder");
  }
  std::string out = instruction_template;
  out.replace(pos, std::string(kPromptInputPlaceholder).size(), input_text);
  return out;
}

namespace {

// The mock infers the conditioning label the same way a hosted model would:
// from the instruction text itself.
std::optional<std::string> extract_conditional_label(
    const std::string& instruction) {
  const std::string prefix = "Discuss the ";
  const std::string suffix = " aspects of the article.";
  const auto start = instruction.find(prefix);
  if (start == std::string::npos) {
    return std::nullopt;
  }
  const auto end = instruction.find(suffix, start);
  if (end == std::string::npos) {
    return std::nullopt;
  }
  return instruction.substr(start + prefix.size(),
                            end - start - prefix.size());
}

const std::vector<std::string>& skeleton_pool() {
  static const std::vector<std::string> pool = {
      "the piece expands on", "further detail covers", "readers also learn of",
      "the account continues with", "a closer look highlights",
      "background notes mention"};
  return pool;
}

const std::vector<std::string>& filler_pool() {
  static const std::vector<std::string> pool = {
      "with further remarks", "and related coverage", "in a longer passage",
      "among other points",  "for added context",    "in the same vein"};
  return pool;
}

std::vector<std::string> salient_words(const std::string& text) {
  std::vector<std::string> words = Tokenizer::split_lower(text);
  std::vector<std::string> salient;
  for (const auto& w : words) {
    if (w.size() >= 4) {
      salient.push_back(w);
    }
  }
  if (salient.empty()) {
    salient = words;
  }
  if (salient.empty()) {
    salient.push_back("text");
  }
  return salient;
}

}  // namespace

std::vector<std::string> MockBackend::generate(const GenerationRequest& request) {
  ++calls_;
  if (request.n_samples == 0) {
    throw_invalid("mock generate: n_samples must be at least 1");
  }
  const auto label = extract_conditional_label(request.instruction);
  const auto words = salient_words(request.input_text);

  // Seed depends only on the request content, never on call order.
  std::uint64_t h = fnv1a64(request.instruction, fnv1a64_mix(0x9e3779b9, seed_));
  h = fnv1a64(request.input_text, h);

  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t sample = 0; sample < request.n_samples; ++sample) {
    std::mt19937_64 rng(fnv1a64_mix(h, sample));
    std::string text = skeleton_pool()[uniform_index(rng, skeleton_pool().size())];
    for (int pick = 0; pick < 3; ++pick) {
      text += " " + words[uniform_index(rng, words.size())];
    }
    // Conditional endings reuse the label-prompt wording so that the label's
    // tokens land in the generated text verbatim.
    std::string ending;
    if (label) {
      ending = " overall it is about " + *label + ". clearly it is about " +
               *label + ".";
    }
    while (text.size() + ending.size() < request.params.min_length) {
      text += " " + filler_pool()[uniform_index(rng, filler_pool().size())];
      text += " " + words[uniform_index(rng, words.size())];
    }
    if (text.size() + ending.size() > request.params.max_length) {
      const std::size_t budget =
          request.params.max_length > ending.size()
              ? request.params.max_length - ending.size()
              : 0;
      if (text.size() > budget) {
        const auto cut = text.rfind(' ', budget);
        text = text.substr(0, cut == std::string::npos ? budget : cut);
      }
    }
    text += ending;
    while (!seen.insert(text).second) {
      text += " indeed";
    }
    out.push_back(std::move(text));
  }
  return out;
}

RemoteBackend::RemoteBackend(RemoteOptions options)
    : options_(std::move(options)) {
  if (options_.endpoint.empty()) {
    throw_invalid("remote backend: endpoint not configured");
  }
  if (const char* token = std::getenv(options_.token_env.c_str())) {
    token_ = token;
  }
}

std::vector<std::string> RemoteBackend::generate(
    const GenerationRequest& request) {
  nlohmann::json body{
      {"prompt", assemble_prompt(request.instruction, request.input_text)},
      {"n", request.n_samples},
      {"temperature", request.params.temperature},
      {"top_p", request.params.top_p},
      {"min_length", request.params.min_length},
      {"max_length", request.params.max_length},
  };
  const std::string payload = body.dump();

  std::string last_error;
  int backoff_ms = options_.initial_backoff_ms;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
    httplib::Client client(options_.endpoint);
    client.set_connection_timeout(options_.timeout_seconds, 0);
    client.set_read_timeout(options_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!token_.empty()) {
      headers.emplace("Authorization", "Bearer " + token_);
    }
    auto res = client.Post("/generate", headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    try {
      auto parsed = nlohmann::json::parse(res->body);
      std::vector<std::string> texts =
          parsed.at("texts").get<std::vector<std::string>>();
      if (texts.empty()) {
        last_error = "empty text list in response";
        continue;
      }
      for (const auto& t : texts) {
        if (t.empty()) {
          throw Error(ErrorCode::generation_error,
                      "remote backend: empty generation in response");
        }
      }
      return texts;
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("malformed response: ") + e.what();
    }
  }
  throw Error(ErrorCode::generation_error,
              "remote backend: giving up after " +
                  std::to_string(options_.max_attempts) + " attempts (" +
                  last_error + ")");
}

std::uint64_t gen_key_hash(const GenKey& key) {
  // Length-prefixed field framing so (text, label) pairs never collide by
  // concatenation. The constant layout is part of the cache file format.
  std::uint64_t h = fnv1a64_mix(0xcbf29ce484222325ULL, key.doc_text.size());
  h = fnv1a64(key.doc_text, h);
  h = fnv1a64_mix(h, key.label_description.size());
  h = fnv1a64(key.label_description, h);
  h = fnv1a64_mix(h, key.kind == AugmentationKind::conditional ? 1 : 0);
  return h;
}

namespace {

constexpr char kGenDictMagic[8] = {'G', 'D', 'I', 'C', 'T', 'v', '1', '\n'};

template <typename T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  auto v = static_cast<std::uint64_t>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffU);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
bool read_le(std::istream& in, T& value) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    return false;
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  value = static_cast<T>(v);
  return true;
}

}  // namespace

GenDict::GenDict(std::filesystem::path file) : file_(std::move(file)) {
  std::ifstream in(file_, std::ios::binary);
  if (!in) {
    return;  // fresh cache; created on first insert
  }
  char magic[8];
  if (!in.read(magic, sizeof(magic)) ||
      !std::equal(std::begin(magic), std::end(magic), kGenDictMagic)) {
    throw Error(ErrorCode::parse_error,
                "gendict: unrecognized header in " + file_.string());
  }
  // Replay records; a truncated tail (interrupted append) simply ends the
  // replay. First write wins for duplicate keys.
  while (true) {
    std::uint64_t key = 0;
    std::uint8_t kind = 0;
    std::int32_t label = 0;
    std::uint32_t count = 0;
    if (!read_le(in, key)) {
      break;
    }
    if (!read_le(in, kind) || !read_le(in, label) || !read_le(in, count)) {
      break;
    }
    Entry entry;
    entry.kind = kind == 1 ? AugmentationKind::conditional
                           : AugmentationKind::input;
    entry.label = label;
    bool complete = true;
    for (std::uint32_t i = 0; i < count; ++i) {
      std::uint32_t len = 0;
      if (!read_le(in, len)) {
        complete = false;
        break;
      }
      std::string text(len, '\0');
      if (!in.read(text.data(), len)) {
        complete = false;
        break;
      }
      entry.texts.push_back(std::move(text));
    }
    if (!complete) {
      break;
    }
    entries_.emplace(key, std::move(entry));
  }
}

std::optional<AugmentationSet> GenDict::lookup(const GenKey& key) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = entries_.find(gen_key_hash(key));
  if (it == entries_.end()) {
    return std::nullopt;
  }
  AugmentationSet set;
  set.kind = it->second.kind;
  if (it->second.kind == AugmentationKind::conditional) {
    set.pseudo_label = it->second.label;
  }
  set.texts = it->second.texts;
  return set;
}

void GenDict::insert(const GenKey& key, const AugmentationSet& set) {
  if (set.texts.empty()) {
    throw_invalid("gendict: refusing to cache an empty augmentation set");
  }
  std::lock_guard<std::mutex> lock(mutex_);
  const std::uint64_t hash = gen_key_hash(key);
  Entry entry;
  entry.kind = set.kind;
  entry.label = set.pseudo_label.value_or(-1);
  entry.texts = set.texts;
  if (!entries_.emplace(hash, entry).second) {
    return;  // already cached; keep the first generation
  }
  if (file_.empty()) {
    return;  // in-memory cache
  }
  const bool fresh = !std::filesystem::exists(file_);
  std::ofstream out(file_, std::ios::binary | std::ios::app);
  if (!out) {
    throw Error(ErrorCode::io_error, "gendict: cannot open " + file_.string());
  }
  if (fresh) {
    out.write(kGenDictMagic, sizeof(kGenDictMagic));
  }
  write_le(out, hash);
  write_le(out, static_cast<std::uint8_t>(
                    entry.kind == AugmentationKind::conditional ? 1 : 0));
  write_le(out, static_cast<std::int32_t>(entry.label));
  write_le(out, static_cast<std::uint32_t>(entry.texts.size()));
  for (const auto& text : entry.texts) {
    write_le(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
  }
  out.flush();
  if (!out) {
    throw Error(ErrorCode::io_error, "gendict: write failed on " + file_.string());
  }
}

std::size_t GenDict::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.size();
}

AugmentationSet generate_input_augs(const Document& doc, std::size_t k,
                                    GenerationBackend& backend, GenDict& cache,
                                    const GenerationParams& params) {
  if (k == 0) {
    throw_invalid("generate_input_augs: k must be at least 1");
  }
  const GenKey key{doc.text, "", AugmentationKind::input};
  if (auto cached = cache.lookup(key)) {
    cached->doc_id = doc.id;
    return *cached;
  }
  GenerationRequest request;
  request.instruction = render_instruction(InstructionKind::elaborate);
  request.input_text = doc.text;
  request.params = params;
  request.n_samples = k;

  AugmentationSet set;
  set.doc_id = doc.id;
  set.kind = AugmentationKind::input;
  try {
    set.texts = backend.generate(request);
  } catch (const Error& e) {
    throw Error(ErrorCode::generation_error,
                "input augmentation failed for document '" + doc.id +
                    "': " + e.what());
  }
  if (set.texts.size() != k) {
    throw Error(ErrorCode::generation_error,
                "input augmentation for document '" + doc.id + "' returned " +
                    std::to_string(set.texts.size()) + " texts, expected " +
                    std::to_string(k));
  }
  cache.insert(key, set);
  return set;
}

AugmentationSet generate_conditional_augs(const Document& doc,
                                          int pseudo_label,
                                          const std::string& label_description,
                                          std::size_t m,
                                          GenerationBackend& backend,
                                          GenDict& cache,
                                          const GenerationParams& params) {
  if (m == 0) {
    throw_invalid("generate_conditional_augs: m must be at least 1");
  }
  if (label_description.empty()) {
    throw_invalid("generate_conditional_augs: empty label description");
  }
  const GenKey key{doc.text, label_description, AugmentationKind::conditional};
  if (auto cached = cache.lookup(key)) {
    cached->doc_id = doc.id;
    cached->pseudo_label = pseudo_label;
    return *cached;
  }
  GenerationRequest request;
  request.instruction =
      render_instruction(InstructionKind::conditional, label_description);
  request.input_text = doc.text;
  request.params = params;
  request.n_samples = m;

  AugmentationSet set;
  set.doc_id = doc.id;
  set.kind = AugmentationKind::conditional;
  set.pseudo_label = pseudo_label;
  try {
    set.texts = backend.generate(request);
  } catch (const Error& e) {
    throw Error(ErrorCode::generation_error,
                "conditional augmentation failed for document '" + doc.id +
                    "': " + e.what());
  }
  if (set.texts.size() != m) {
    throw Error(ErrorCode::generation_error,
                "conditional augmentation for document '" + doc.id +
                    "' returned " + std::to_string(set.texts.size()) +
                    " texts, expected " + std::to_string(m));
  }
  cache.insert(key, set);
  return set;
}

}  // namespace gcst
