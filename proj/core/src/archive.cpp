#include "grnn/archive.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "grnn/error.hpp"

namespace grnn {

namespace {

constexpr char kMagic[4] = {'G', 'R', 'N', 'N'};

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const uint8_t* p, size_t n) : p_(p), n_(n) {}

  void need(size_t k) const {
    if (pos_ + k > n_) throw ArchiveError("malformed archive: truncated file");
  }
  uint8_t u8() {
    need(1);
    return p_[pos_++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(p_[pos_] | (p_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str(size_t k) {
    need(k);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), k);
    pos_ += k;
    return s;
  }
  size_t pos() const { return pos_; }
  size_t remaining() const { return n_ - pos_; }
  const uint8_t* at(size_t off) const { return p_ + off; }

 private:
  const uint8_t* p_;
  size_t n_;
  size_t pos_ = 0;
};

}  // namespace

void WeightArchive::add(const std::string& name, std::vector<uint32_t> dims,
                        std::vector<float> data) {
  if (name.empty() || name.size() > 0xffff)
    throw ArchiveError("tensor name must be 1..65535 bytes");
  if (find(name))
    throw ArchiveError("duplicate tensor name '" + name + "'");
  if (dims.empty() || dims.size() > 4)
    throw ArchiveError("tensor rank must be 1..4");
  uint64_t n = 1;
  for (uint32_t d : dims) {
    if (d == 0) throw ArchiveError("tensor dims must be >= 1");
    n *= d;
  }
  if (n != data.size())
    throw ArchiveError("tensor '" + name + "' dims/data size mismatch");
  entries_.push_back(Entry{name, std::move(dims), std::move(data)});
}

const WeightArchive::Entry* WeightArchive::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

void WeightArchive::save(const std::filesystem::path& path) const {
  std::vector<uint8_t> head;
  head.insert(head.end(), kMagic, kMagic + 4);
  put_u16(head, kVersion);
  put_u32(head, static_cast<uint32_t>(entries_.size()));

  uint64_t offset = 0;
  for (const auto& e : entries_) {
    put_u16(head, static_cast<uint16_t>(e.name.size()));
    head.insert(head.end(), e.name.begin(), e.name.end());
    head.push_back(0);  // dtype f32
    head.push_back(static_cast<uint8_t>(e.dims.size()));
    for (uint32_t d : e.dims) put_u32(head, d);
    put_u64(head, offset);
    offset += e.numel() * sizeof(float);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(head.data()),
            static_cast<std::streamsize>(head.size()));
  static_assert(sizeof(float) == 4);
  for (const auto& e : entries_)
    out.write(reinterpret_cast<const char*>(e.data.data()),
              static_cast<std::streamsize>(e.data.size() * sizeof(float)));
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

WeightArchive WeightArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
  Reader r(buf.data(), buf.size());

  r.need(4);
  if (std::memcmp(r.at(0), kMagic, 4) != 0)
    throw ArchiveError("malformed archive: bad magic");
  r.str(4);
  const uint16_t version = r.u16();
  if (version != kVersion)
    throw ArchiveError("malformed archive: unsupported version " +
                       std::to_string(version));
  const uint32_t count = r.u32();

  struct Record {
    std::string name;
    std::vector<uint32_t> dims;
    uint64_t offset;
    uint64_t bytes;
  };
  std::vector<Record> records;
  records.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    Record rec;
    const uint16_t len = r.u16();
    rec.name = r.str(len);
    const uint8_t dtype = r.u8();
    if (dtype != 0)
      throw ArchiveError("malformed archive: unknown dtype tag " +
                         std::to_string(dtype));
    const uint8_t rank = r.u8();
    if (rank < 1 || rank > 4)
      throw ArchiveError("malformed archive: bad rank " +
                         std::to_string(rank));
    uint64_t n = 1;
    for (uint8_t d = 0; d < rank; ++d) {
      rec.dims.push_back(r.u32());
      if (rec.dims.back() == 0)
        throw ArchiveError("malformed archive: zero dimension");
      n *= rec.dims.back();
    }
    rec.offset = r.u64();
    rec.bytes = n * sizeof(float);
    records.push_back(std::move(rec));
  }

  const size_t payload_start = r.pos();
  const uint64_t payload_size = buf.size() - payload_start;

  // offsets: in-bounds, pairwise non-overlapping, names unique
  std::vector<const Record*> by_offset;
  for (const auto& rec : records) by_offset.push_back(&rec);
  std::sort(by_offset.begin(), by_offset.end(),
            [](const Record* a, const Record* b) { return a->offset < b->offset; });
  uint64_t prev_end = 0;
  for (const Record* rec : by_offset) {
    if (rec->offset + rec->bytes > payload_size)
      throw ArchiveError("malformed archive: tensor '" + rec->name +
                         "' extends past end of payload");
    if (rec->offset < prev_end)
      throw ArchiveError("malformed archive: overlapping tensors at '" +
                         rec->name + "'");
    prev_end = rec->offset + rec->bytes;
  }

  WeightArchive ar;
  for (const auto& rec : records) {
    std::vector<float> data(rec.bytes / sizeof(float));
    std::memcpy(data.data(), buf.data() + payload_start + rec.offset,
                rec.bytes);
    ar.add(rec.name, rec.dims, std::move(data));
  }
  return ar;
}

WeightArchive weights_to_archive(const GrnnWeights& w, const GrnnConfig& cfg) {
  WeightArchive ar;
  for (const auto& [name, t] : weights_to_map(w, cfg)) {
    const Shape4& s = t.shape();
    std::vector<uint32_t> dims;
    if (name.size() > 5 && name.substr(name.size() - 5) == ".bias") {
      dims = {static_cast<uint32_t>(s.c)};
    } else {
      dims = {static_cast<uint32_t>(s.b), static_cast<uint32_t>(s.c),
              static_cast<uint32_t>(s.h), static_cast<uint32_t>(s.w)};
    }
    ar.add(name, std::move(dims), t.vec());
  }
  return ar;
}

namespace {

Tensor4 entry_tensor(const WeightArchive::Entry& e) {
  if (e.dims.size() == 1)
    return Tensor4({1, static_cast<int64_t>(e.dims[0]), 1, 1}, e.data);
  if (e.dims.size() == 4)
    return Tensor4({static_cast<int64_t>(e.dims[0]),
                    static_cast<int64_t>(e.dims[1]),
                    static_cast<int64_t>(e.dims[2]),
                    static_cast<int64_t>(e.dims[3])},
                   e.data);
  throw ArchiveError("tensor '" + e.name + "' has unexpected rank " +
                     std::to_string(e.dims.size()));
}

}  // namespace

std::pair<GrnnWeights, GrnnConfig> weights_from_archive(
    const WeightArchive& ar) {
  auto require = [&](const std::string& name) -> const WeightArchive::Entry& {
    const auto* e = ar.find(name);
    if (!e) throw ArchiveError("archive is missing tensor '" + name + "'");
    return *e;
  };

  GrnnConfig cfg;

  const auto& state_w = require("state_head.weight");
  if (state_w.dims.size() != 4)
    throw ArchiveError("state_head.weight must be rank 4");
  cfg.channels = static_cast<int64_t>(state_w.dims[0]);

  int64_t blocks = 0;
  while (ar.find("trunk." + std::to_string(blocks) + ".conv1.weight") ||
         ar.find("trunk." + std::to_string(blocks) +
                 ".conv1.primary.weight"))
    ++blocks;
  if (blocks == 0) throw ArchiveError("archive holds no trunk blocks");
  cfg.num_res_blocks = blocks;
  cfg.ghost_trunk = ar.find("trunk.0.conv1.primary.weight") != nullptr;

  int64_t fusion_in = 0;
  if (const auto* fp = ar.find("fusion.primary.weight")) {
    if (fp->dims.size() != 4)
      throw ArchiveError("fusion.primary.weight must be rank 4");
    const int64_t m = static_cast<int64_t>(fp->dims[0]);
    fusion_in = static_cast<int64_t>(fp->dims[1]);
    cfg.primary_kernel = static_cast<int64_t>(fp->dims[2]);
    const auto& ch = require("fusion.cheap.weight");
    if (ch.dims.size() != 4)
      throw ArchiveError("fusion.cheap.weight must be rank 4");
    cfg.cheap_kernel = static_cast<int64_t>(ch.dims[2]);
    const int64_t ghosts = static_cast<int64_t>(ch.dims[0]);
    if (m < 1 || ghosts % m != 0)
      throw ArchiveError("fusion cheap kernels inconsistent with intrinsic maps");
    cfg.ghost_ratio = ghosts / m + 1;
  } else {
    const auto& fw = require("fusion.weight");
    if (fw.dims.size() != 4) throw ArchiveError("fusion.weight must be rank 4");
    fusion_in = static_cast<int64_t>(fw.dims[1]);
    cfg.primary_kernel = static_cast<int64_t>(fw.dims[2]);
    cfg.ghost_ratio = 1;
  }

  // fusion input = 3 + 3 + 3*scale^2 + channels
  const int64_t rest = fusion_in - 2 * cfg.color_channels - cfg.channels;
  if (rest <= 0 || rest % cfg.color_channels != 0)
    throw ArchiveError("cannot infer scale from fusion input channels");
  const int64_t s2 = rest / cfg.color_channels;
  const auto s = static_cast<int64_t>(std::llround(std::sqrt(
      static_cast<double>(s2))));
  if (s * s != s2 || s < 1)
    throw ArchiveError("cannot infer scale from fusion input channels");
  cfg.scale = s;

  cfg.validate();

  std::map<std::string, Tensor4> m;
  for (const auto& e : ar.entries()) m.emplace(e.name, entry_tensor(e));
  GrnnWeights w = weights_from_map(m, cfg);
  return {std::move(w), cfg};
}

}  // namespace grnn
