#include "qgrl/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace qgrl {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

constexpr char kMagic[4] = {'Q', 'G', 'R', 'L'};
constexpr uint32_t kVersion = 1;

uint64_t fnv1a64(const char* data, size_t len) {
  uint64_t h = 14695981039346656037ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

template <class T>
void append_raw(std::string& out, const T& value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

class Cursor {
 public:
  Cursor(const std::string& data, size_t end) : data_(data), end_(end) {}

  size_t pos() const { return pos_; }
  bool at_end() const { return pos_ == end_; }

  template <class T>
  T read() {
    need(sizeof(T), "fixed-width field");
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string read_bytes(size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void read_into(void* dst, size_t n, const char* what) {
    need(n, what);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

  void seek(size_t p) { pos_ = p; }

 private:
  void need(size_t n, const char* what) {
    if (n > end_ - pos_)
      throw IntegrityError(std::string("checkpoint truncated while reading ") +
                           what);
  }
  const std::string& data_;
  size_t end_;
  size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const Vocabulary& vocab, const FeatureVocab& fvocab,
                     const std::string& config_json) {
  nlohmann::json config;
  if (config_json.empty()) {
    config = nlohmann::json::object();
  } else {
    config = nlohmann::json::parse(config_json, nullptr, false);
    if (config.is_discarded())
      throw ArgError("save_checkpoint: config snapshot is not valid JSON");
  }
  nlohmann::json header;
  header["config"] = config;
  header["vocab"] = vocab.tokens();
  header["fvocab"] = {{"pos", fvocab.pos_tags()},
                      {"ner", fvocab.ner_tags()},
                      {"case", fvocab.case_tags()},
                      {"answer", fvocab.answer_tags()}};
  std::string header_text = header.dump();

  std::string body;
  body.append(kMagic, 4);
  append_raw(body, kVersion);
  append_raw(body, static_cast<uint64_t>(header_text.size()));
  body += header_text;
  for (const std::string& name : store.names()) {
    const DenseArray& arr = store.value(name);
    append_raw(body, static_cast<uint64_t>(name.size()));
    body += name;
    append_raw(body, static_cast<uint32_t>(arr.rank()));
    for (Eigen::Index d : arr.shape())
      append_raw(body, static_cast<uint64_t>(d));
    size_t nbytes = static_cast<size_t>(arr.size()) * sizeof(double);
    size_t off = body.size();
    body.resize(off + nbytes);
    std::memcpy(body.data() + off, arr.mat().data(), nbytes);
  }
  uint64_t checksum = fnv1a64(body.data(), body.size());
  append_raw(body, checksum);

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("save_checkpoint: cannot open " + tmp + " for writing");
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out.good()) {
      out.close();
      std::remove(tmp.c_str());
      throw IoError("save_checkpoint: short write to " + tmp);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("save_checkpoint: cannot rename " + tmp + " to " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  in.close();

  if (data.size() < 4)
    throw IntegrityError("load_checkpoint: file shorter than its magic");
  if (std::memcmp(data.data(), kMagic, 4) != 0)
    throw FormatError("load_checkpoint: bad magic; not a checkpoint file");
  if (data.size() < 4 + sizeof(uint32_t) + 2 * sizeof(uint64_t))
    throw IntegrityError("load_checkpoint: truncated header");
  uint32_t version;
  std::memcpy(&version, data.data() + 4, sizeof version);
  if (version != kVersion)
    throw FormatError("load_checkpoint: format version " +
                      std::to_string(version) + " unsupported; expected " +
                      std::to_string(kVersion));
  uint64_t stored_sum;
  std::memcpy(&stored_sum, data.data() + data.size() - sizeof stored_sum,
              sizeof stored_sum);
  uint64_t actual = fnv1a64(data.data(), data.size() - sizeof stored_sum);
  if (stored_sum != actual)
    throw IntegrityError("load_checkpoint: checksum mismatch; file corrupt");

  Cursor cur(data, data.size() - sizeof stored_sum);
  cur.seek(4 + sizeof(uint32_t));
  uint64_t header_len = cur.read<uint64_t>();
  std::string header_text =
      cur.read_bytes(static_cast<size_t>(header_len), "header");
  nlohmann::json header = nlohmann::json::parse(header_text, nullptr, false);
  if (header.is_discarded() || !header.is_object())
    throw FormatError("load_checkpoint: header is not a JSON object");
  if (!header.contains("config") || !header.contains("vocab") ||
      !header.contains("fvocab"))
    throw FormatError("load_checkpoint: header is missing required keys");

  Checkpoint ck;
  ck.config_json = header["config"].dump();
  std::vector<std::string> vtokens =
      header["vocab"].get<std::vector<std::string>>();
  ck.vocab = Vocabulary::from_tokens(vtokens);
  const auto& fv = header["fvocab"];
  ck.fvocab = FeatureVocab::from_lists(
      fv.at("pos").get<std::vector<std::string>>(),
      fv.at("ner").get<std::vector<std::string>>());
  if (fv.at("case").get<std::vector<std::string>>() != ck.fvocab.case_tags() ||
      fv.at("answer").get<std::vector<std::string>>() !=
          ck.fvocab.answer_tags())
    throw FormatError(
        "load_checkpoint: case/answer tag sets do not match this build");

  while (!cur.at_end()) {
    uint64_t name_len = cur.read<uint64_t>();
    std::string name =
        cur.read_bytes(static_cast<size_t>(name_len), "array name");
    uint32_t rank = cur.read<uint32_t>();
    if (rank != 1 && rank != 2)
      throw FormatError("load_checkpoint: array '" + name +
                        "' has unsupported rank " + std::to_string(rank));
    Shape shape;
    for (uint32_t d = 0; d < rank; ++d)
      shape.push_back(static_cast<Eigen::Index>(cur.read<uint64_t>()));
    DenseArray arr = DenseArray::zeros(shape);
    cur.read_into(arr.mat().data(),
                  static_cast<size_t>(arr.size()) * sizeof(double),
                  ("array '" + name + "' data").c_str());
    ck.store.insert(name, std::move(arr));
  }
  return ck;
}

ParamStore extract_prefix(const ParamStore& store, const std::string& prefix) {
  ParamStore out;
  for (const std::string& name : store.names())
    if (name.rfind(prefix, 0) == 0) out.insert(name, store.value(name));
  return out;
}

void merge_stores(ParamStore& into, const ParamStore& from) {
  for (const std::string& name : from.names()) {
    if (into.has(name))
      throw ArgError("merge_stores: duplicate array name '" + name + "'");
    into.insert(name, from.value(name));
  }
}

}  // namespace qgrl
