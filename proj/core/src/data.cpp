#include "dtsl/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dtsl/errors.hpp"
#include "dtsl/rng.hpp"

namespace dtsl {

std::string class_name(std::size_t label) {
  if (label == kClassTrue) return "true";
  if (label == kClassFake) return "fake";
  throw ValueError("class index " + std::to_string(label) + " has no name");
}

CorpusLoad load_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open corpus '" + path + "'");

  CorpusLoad out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t total_lines = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    ++total_lines;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    auto reject = [&](const std::string& why) {
      ++out.malformed_lines;
      if (out.warnings.size() < 20) {
        out.warnings.push_back("line " + std::to_string(line_no) + ": " + why);
      }
    };
    if (obj.is_discarded() || !obj.is_object()) {
      reject("not a JSON object");
      continue;
    }
    TweetRecord rec;
    if (!obj.contains("id") || !obj["id"].is_string() || obj["id"].get<std::string>().empty()) {
      reject("missing or empty id");
      continue;
    }
    if (!obj.contains("event") || !obj["event"].is_string() || obj["event"].get<std::string>().empty()) {
      reject("missing or empty event");
      continue;
    }
    if (!obj.contains("text") || !obj["text"].is_string()) {
      reject("missing text");
      continue;
    }
    rec.id = obj["id"].get<std::string>();
    rec.event = obj["event"].get<std::string>();
    rec.text = obj["text"].get<std::string>();
    if (obj.contains("label") && !obj["label"].is_null()) {
      if (!obj["label"].is_string()) {
        reject("label is neither string nor null");
        continue;
      }
      const std::string label = obj["label"].get<std::string>();
      if (label == "fake") {
        rec.label = kClassFake;
      } else if (label == "true") {
        rec.label = kClassTrue;
      } else {
        reject("unknown label '" + label + "'");
        continue;
      }
    }
    out.records.push_back(std::move(rec));
  }
  if (total_lines == 0) {
    out.warnings.push_back("corpus file '" + path + "' is empty");
    return out;
  }
  if (out.malformed_lines * 100 > total_lines) {
    throw IoError("corpus '" + path + "': " + std::to_string(out.malformed_lines) + " of " +
                  std::to_string(total_lines) + " lines malformed (over 1%)");
  }
  return out;
}

namespace {

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case U' ':
    case U'\t':
    case U'\n':
    case U'\r':
    case U'\f':
    case U'\v':
    case 0x85:    // NEL
    case 0xA0:    // NBSP
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes the next UTF-8 codepoint; malformed bytes pass through one at a
// time so tokenization stays total.
char32_t next_codepoint(const std::string& s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char b0 = byte(i);
  std::size_t len = 1;
  char32_t cp = b0;
  if (b0 >= 0xF0) {
    len = 4;
    cp = b0 & 0x07u;
  } else if (b0 >= 0xE0) {
    len = 3;
    cp = b0 & 0x0Fu;
  } else if (b0 >= 0xC0) {
    len = 2;
    cp = b0 & 0x1Fu;
  }
  if (len == 1 || i + len > s.size()) {
    ++i;
    return b0;
  }
  for (std::size_t k = 1; k < len; ++k) {
    if ((byte(i + k) & 0xC0u) != 0x80u) {
      ++i;
      return b0;
    }
    cp = (cp << 6) | (byte(i + k) & 0x3Fu);
  }
  i += len;
  return cp;
}

bool has_prefix_ci(const std::string& s, const char* prefix) {
  const std::size_t n = std::strlen(prefix);
  if (s.size() < n) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  }
  return true;
}

bool is_ascii_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string process_token(const std::string& raw) {
  if (has_prefix_ci(raw, "http://") || has_prefix_ci(raw, "https://") || has_prefix_ci(raw, "www.")) {
    return "<url>";
  }
  if (raw.size() >= 2 && raw[0] == '@') return "<user>";
  std::string t;
  t.reserve(raw.size());
  for (char c : raw) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  std::size_t end = t.size();
  while (end > 0 && is_ascii_punct(t[end - 1])) --end;
  std::size_t begin = 0;
  while (begin < end && is_ascii_punct(t[begin])) {
    if (t[begin] == '#' && begin + 1 < end) break;  // hashtag marker stays
    ++begin;
  }
  return t.substr(begin, end - begin);
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  std::string current;
  auto flush = [&]() {
    if (current.empty()) return;
    std::string token = process_token(current);
    if (!token.empty()) tokens.push_back(std::move(token));
    current.clear();
  };
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t cp = next_codepoint(text, i);
    if (is_unicode_space(cp)) {
      flush();
    } else {
      current.append(text, start, i - start);
    }
  }
  flush();
  return tokens;
}

const std::vector<double>* EmbeddingTable::lookup(const std::string& word) const {
  const auto it = vectors.find(word);
  return it == vectors.end() ? nullptr : &it->second;
}

EmbeddingLoad load_embeddings(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open embeddings '" + path + "'");

  EmbeddingLoad out;
  std::string line;
  std::size_t line_no = 0;
  bool first_content_line = true;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<double> values;
    std::string tok;
    bool bad_number = false;
    while (ls >> tok) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        bad_number = true;
        break;
      }
      values.push_back(v);
    }
    if (first_content_line) {
      first_content_line = false;
      // "vocab_size dim" header: two integer fields.
      if (values.size() == 1 && !bad_number) {
        double count_v = 0.0;
        const auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), count_v);
        const bool word_is_int = ec == std::errc{} && ptr == word.data() + word.size() &&
                                 count_v == std::floor(count_v) && count_v > 0;
        if (word_is_int && values[0] == std::floor(values[0]) && values[0] > 0) {
          out.table.dim = static_cast<std::size_t>(values[0]);
          continue;
        }
      }
    }
    if (bad_number) throw IoError("embeddings '" + path + "' line " + std::to_string(line_no) + ": bad number");
    if (values.empty()) throw IoError("embeddings '" + path + "' line " + std::to_string(line_no) + ": no vector");
    if (out.table.dim == 0) out.table.dim = values.size();
    if (values.size() != out.table.dim) {
      throw IoError("embeddings '" + path + "' line " + std::to_string(line_no) + ": vector of length " +
                    std::to_string(values.size()) + ", expected " + std::to_string(out.table.dim));
    }
    if (!out.table.vectors.emplace(word, std::move(values)).second) {
      if (out.warnings.size() < 20) {
        out.warnings.push_back("duplicate word '" + word + "' at line " + std::to_string(line_no) +
                               "; first occurrence kept");
      }
    }
  }
  if (out.table.vectors.empty()) throw IoError("embeddings '" + path + "' holds no vectors");
  return out;
}

EncodedSample encode(const TweetRecord& record, const EmbeddingTable& table, std::size_t max_len) {
  if (max_len < 8) throw ValueError("encode: max_len must be >= 8, got " + std::to_string(max_len));
  if (table.dim == 0) throw ValueError("encode: embedding table has no dimension");
  EncodedSample sample;
  sample.matrix = Tensor({1, max_len, table.dim});
  sample.label = record.label;
  sample.id = record.id;
  sample.event = record.event;
  const std::vector<std::string> tokens = tokenize(record.text);
  const std::size_t rows = std::min(tokens.size(), max_len);
  for (std::size_t r = 0; r < rows; ++r) {
    if (const std::vector<double>* vec = table.lookup(tokens[r])) {
      std::copy(vec->begin(), vec->end(), sample.matrix.data() + r * table.dim);
    }
  }
  return sample;
}

CorpusSplit CorpusSplit::designate(std::vector<TweetRecord> records, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw ValueError("labeled ratio must lie in (0, 1], got " + std::to_string(ratio));
  }
  for (const TweetRecord& r : records) {
    if (!r.label.has_value()) {
      throw ValueError("record '" + r.id + "' carries no ground-truth label; cannot designate");
    }
  }
  const std::size_t n = records.size();
  const std::size_t m = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  if (m == 0) {
    throw ValueError("labeled ratio " + std::to_string(ratio) + " over " + std::to_string(n) +
                     " records yields zero labeled samples");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed({seed, 0xD351u}));
  rng.shuffle(order);

  CorpusSplit split;
  split.records_ = std::move(records);
  split.labeled_.assign(n, 0);
  for (std::size_t i = 0; i < std::min(m, n); ++i) split.labeled_[order[i]] = 1;
  split.labeled_count_ = std::min(m, n);
  split.ratio_ = ratio;
  return split;
}

std::optional<std::size_t> CorpusSplit::training_label(std::size_t i) const {
  if (!is_labeled(i)) return std::nullopt;
  return records_[i].label;
}

std::size_t CorpusSplit::ground_truth_label(std::size_t i) const { return *records_[i].label; }

std::vector<std::vector<std::size_t>> batch_index_plan(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                       std::uint64_t epoch) {
  if (batch_size == 0) throw ValueError("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed({seed, epoch, 0xBA7Cu}));
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Minibatch assemble_minibatch(const CorpusSplit& split, const EmbeddingTable& table, std::size_t max_len,
                             const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ValueError("assemble_minibatch: empty batch");
  Minibatch batch;
  batch.x = Tensor({indices.size(), 1, max_len, table.dim});
  batch.indices = indices;
  const std::size_t stride = max_len * table.dim;
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    TweetRecord rec{split.id(i), split.event(i), split.text(i), std::nullopt};
    const EncodedSample sample = encode(rec, table, max_len);
    std::copy(sample.matrix.span().begin(), sample.matrix.span().end(), batch.x.data() + r * stride);
    batch.labels.push_back(split.training_label(i));
    batch.ids.push_back(split.id(i));
  }
  return batch;
}

}  // namespace dtsl
