#include "deepen/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "deepen/errors.hpp"

namespace deepen {

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

namespace {

static_assert(std::endian::native == std::endian::little || true,
              "explicit little-endian encoding below handles either order");

class Buffer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(std::vector<std::uint8_t> bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    const auto* p = take(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    const auto* p = take(8);
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void expect_magic(const char* magic) {
    const auto* p = take(4);
    if (std::memcmp(p, magic, 4) != 0) {
      throw ValidationError(path_ + ": bad magic, expected " + magic);
    }
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return bytes_.size(); }
  const std::uint8_t* data() const { return bytes_.data(); }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::uint8_t* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw ValidationError(path_ + ": truncated file");
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::vector<std::uint8_t> bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

void write_file(const std::string& path, const char* magic,
                const std::vector<std::uint8_t>& payload, bool with_checksum = false) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  f.write(magic, 4);
  f.write(reinterpret_cast<const char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  if (with_checksum) {
    Buffer cs;
    cs.u64(fnv1a64(payload.data(), payload.size()));
    f.write(reinterpret_cast<const char*>(cs.bytes().data()), 8);
  }
  if (!f) throw ValidationError("write failed: " + path);
}

Reader read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw ValidationError("cannot open: " + path);
  const std::streamsize n = f.tellg();
  f.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
  f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f) throw ValidationError("read failed: " + path);
  return Reader(std::move(bytes), path);
}

void encode_grid(Buffer& buf, const ComplexGrid& g) {
  buf.u16(1);
  buf.u32(static_cast<std::uint32_t>(g.height));
  buf.u32(static_cast<std::uint32_t>(g.width));
  for (const auto& v : g.values) {
    buf.f64(v.real());
    buf.f64(v.imag());
  }
}

ComplexGrid decode_grid(Reader& r) {
  if (r.u16() != 1) throw ValidationError("unsupported grid version");
  const int h = static_cast<int>(r.u32());
  const int w = static_cast<int>(r.u32());
  if (h <= 0 || w <= 0 || static_cast<std::uint64_t>(h) * w > (1u << 28)) {
    throw ValidationError("grid dimensions out of range");
  }
  ComplexGrid g(h, w);
  for (auto& v : g.values) {
    const double re = r.f64();
    const double im = r.f64();
    v = cplx(re, im);
  }
  if (!all_finite(g)) throw ValidationError("grid contains non-finite values");
  return g;
}

}  // namespace

void save_cgrd(const std::string& path, const ComplexGrid& g) {
  Buffer buf;
  encode_grid(buf, g);
  write_file(path, "CGRD", buf.bytes());
}

ComplexGrid load_cgrd(const std::string& path) {
  Reader r = read_file(path);
  r.expect_magic("CGRD");
  return decode_grid(r);
}

namespace {

void save_stack_file(const std::string& path, const char* magic,
                     const std::vector<ComplexGrid>& planes) {
  Buffer buf;
  buf.u16(1);
  buf.u32(static_cast<std::uint32_t>(planes.size()));
  std::vector<std::uint8_t> out = buf.bytes();
  for (const auto& p : planes) {
    Buffer rec;
    encode_grid(rec, p);
    out.push_back('C');
    out.push_back('G');
    out.push_back('R');
    out.push_back('D');
    out.insert(out.end(), rec.bytes().begin(), rec.bytes().end());
  }
  write_file(path, magic, out);
}

std::vector<ComplexGrid> load_stack_file(const std::string& path, const char* magic) {
  Reader r = read_file(path);
  r.expect_magic(magic);
  if (r.u16() != 1) throw ValidationError(path + ": unsupported version");
  const std::uint32_t n = r.u32();
  if (n == 0 || n > 4096) throw ValidationError(path + ": coil count out of range");
  std::vector<ComplexGrid> planes;
  for (std::uint32_t i = 0; i < n; ++i) {
    r.expect_magic("CGRD");
    planes.push_back(decode_grid(r));
    if (!planes.back().same_shape(planes.front())) {
      throw ValidationError(path + ": coil planes disagree on dimensions");
    }
  }
  return planes;
}

}  // namespace

void save_kspace(const std::string& path, const KspaceData& k) {
  save_stack_file(path, "KSPC", k.coils);
}

KspaceData load_kspace(const std::string& path) {
  KspaceData k;
  k.coils = load_stack_file(path, "KSPC");
  return k;
}

void save_csm(const std::string& path, const CoilSensitivities& csm) {
  save_stack_file(path, "CSMS", csm.maps);
}

CoilSensitivities load_csm(const std::string& path) {
  CoilSensitivities csm;
  csm.maps = load_stack_file(path, "CSMS");
  return csm;
}

void save_mask(const std::string& path, const SamplingMask& m) {
  Buffer buf;
  buf.u8(static_cast<std::uint8_t>(m.kind));
  buf.u32(static_cast<std::uint32_t>(m.height));
  buf.u32(static_cast<std::uint32_t>(m.width));
  std::uint8_t acc = 0;
  int nbits = 0;
  for (std::size_t i = 0; i < m.pattern.size(); ++i) {
    if (m.pattern[i]) acc |= static_cast<std::uint8_t>(1u << nbits);
    if (++nbits == 8) {
      buf.u8(acc);
      acc = 0;
      nbits = 0;
    }
  }
  if (nbits > 0) buf.u8(acc);
  write_file(path, "MASK", buf.bytes());
}

SamplingMask load_mask(const std::string& path) {
  Reader r = read_file(path);
  r.expect_magic("MASK");
  SamplingMask m;
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw ValidationError(path + ": unknown mask kind");
  m.kind = static_cast<MaskKind>(kind);
  m.height = static_cast<int>(r.u32());
  m.width = static_cast<int>(r.u32());
  if (m.height <= 0 || m.width <= 0 || static_cast<std::uint64_t>(m.height) * m.width > (1u << 28)) {
    throw ValidationError(path + ": mask dimensions out of range");
  }
  m.pattern.resize(static_cast<std::size_t>(m.height) * m.width);
  std::uint8_t acc = 0;
  int nbits = 0;
  for (auto& bit : m.pattern) {
    if (nbits == 0) acc = r.u8();
    bit = (acc >> nbits) & 1u;
    nbits = (nbits + 1) % 8;
  }
  return m;
}

namespace {

struct NetRecord {
  std::uint32_t out_ch, in_ch, kh, kw;
  std::vector<double> weights;
  std::vector<double> biases;  // empty for the scalar head
};

void save_records(const std::string& path, const std::vector<NetRecord>& records) {
  Buffer buf;
  buf.u16(1);
  buf.u16(static_cast<std::uint16_t>(records.size()));
  for (const auto& rec : records) {
    buf.u32(rec.out_ch);
    buf.u32(rec.in_ch);
    buf.u32(rec.kh);
    buf.u32(rec.kw);
    for (double v : rec.weights) buf.f64(v);
    for (double v : rec.biases) buf.f64(v);
  }
  write_file(path, "DPEN", buf.bytes(), /*with_checksum=*/true);
}

std::vector<NetRecord> load_records(const std::string& path, std::uint64_t* checksum_out) {
  Reader r = read_file(path);
  r.expect_magic("DPEN");
  if (r.size() < 16) throw ValidationError(path + ": truncated checkpoint");
  const std::size_t payload_end = r.size() - 8;
  const std::uint64_t want = fnv1a64(r.data() + 4, payload_end - 4);

  if (r.u16() != 1) throw ValidationError(path + ": unsupported checkpoint version");
  const int n = r.u16();
  std::vector<NetRecord> records;
  for (int i = 0; i < n; ++i) {
    NetRecord rec;
    rec.out_ch = r.u32();
    rec.in_ch = r.u32();
    rec.kh = r.u32();
    rec.kw = r.u32();
    if (rec.out_ch == 0 || rec.in_ch == 0 || rec.kh == 0 || rec.kw == 0 ||
        static_cast<std::uint64_t>(rec.out_ch) * rec.in_ch * rec.kh * rec.kw > (1u << 26)) {
      throw ValidationError(path + ": checkpoint record shape out of range");
    }
    const bool is_head = rec.kh == 1 && rec.kw == 1;
    rec.weights.resize(static_cast<std::size_t>(rec.out_ch) * rec.in_ch * rec.kh * rec.kw);
    for (auto& v : rec.weights) v = r.f64();
    if (!is_head) {
      rec.biases.resize(rec.out_ch);
      for (auto& v : rec.biases) v = r.f64();
    }
    records.push_back(std::move(rec));
  }
  if (r.pos() != payload_end) throw ValidationError(path + ": trailing checkpoint bytes");
  const std::uint64_t got = r.u64();
  if (got != want) throw ValidationError(path + ": checkpoint checksum mismatch");
  if (checksum_out) *checksum_out = got;
  return records;
}

std::vector<NetRecord> stack_records(const ConvStack& stack) {
  std::vector<NetRecord> records;
  for (int l = 0; l < stack.num_layers(); ++l) {
    NetRecord rec;
    rec.out_ch = static_cast<std::uint32_t>(stack.specs[l].out_ch);
    rec.in_ch = static_cast<std::uint32_t>(stack.specs[l].in_ch);
    rec.kh = rec.kw = 3;
    rec.weights.assign(stack.weights(l), stack.weights(l) + stack.weight_count(l));
    rec.biases.assign(stack.biases(l), stack.biases(l) + stack.specs[l].out_ch);
    records.push_back(std::move(rec));
  }
  return records;
}

void records_into_stack(const std::vector<NetRecord>& records, ConvStack& stack,
                        const std::string& path) {
  if (records.size() != static_cast<std::size_t>(stack.num_layers())) {
    throw ValidationError(path + ": record count does not match architecture");
  }
  for (int l = 0; l < stack.num_layers(); ++l) {
    const auto& rec = records[static_cast<std::size_t>(l)];
    if (static_cast<int>(rec.out_ch) != stack.specs[l].out_ch ||
        static_cast<int>(rec.in_ch) != stack.specs[l].in_ch || rec.kh != 3 || rec.kw != 3) {
      throw ValidationError(path + ": layer " + std::to_string(l) + " shape mismatch");
    }
    std::copy(rec.weights.begin(), rec.weights.end(), stack.weights(l));
    std::copy(rec.biases.begin(), rec.biases.end(), stack.biases(l));
  }
}

}  // namespace

void save_energy_net(const std::string& path, const EnergyNet& net) {
  std::vector<NetRecord> records = stack_records(net.stack);
  NetRecord head;
  head.out_ch = 1;
  head.in_ch = static_cast<std::uint32_t>(net.head.size());
  head.kh = head.kw = 1;
  head.weights = net.head;
  records.push_back(std::move(head));
  save_records(path, records);
}

void save_image_net(const std::string& path, const ImageNet& net) {
  save_records(path, stack_records(net.stack));
}

Checkpoint load_checkpoint(const std::string& path) {
  Checkpoint out;
  std::vector<NetRecord> records = load_records(path, &out.checksum);
  if (records.empty()) throw ValidationError(path + ": empty checkpoint");

  const NetRecord& last = records.back();
  if (last.kh == 1 && last.kw == 1 && last.out_ch == 1) {
    EnergyNet net;
    if (last.in_ch != net.head.size()) {
      throw ValidationError(path + ": head width does not match architecture");
    }
    std::vector<NetRecord> stack(records.begin(), records.end() - 1);
    records_into_stack(stack, net.stack, path);
    net.head = last.weights;
    out.energy = std::move(net);
  } else if (last.out_ch == 2) {
    ImageNet net(false);
    records_into_stack(records, net.stack, path);
    out.image = std::move(net);
  } else {
    throw ValidationError(path + ": unrecognized checkpoint structure");
  }
  return out;
}

void save_adam(const std::string& path, const AdamState& st) {
  Buffer buf;
  buf.u16(1);
  buf.u64(static_cast<std::uint64_t>(st.step));
  buf.u64(st.m.size());
  for (double v : st.m) buf.f64(v);
  for (double v : st.v) buf.f64(v);
  write_file(path, "DOPT", buf.bytes(), /*with_checksum=*/true);
}

AdamState load_adam(const std::string& path) {
  Reader r = read_file(path);
  r.expect_magic("DOPT");
  if (r.size() < 16) throw ValidationError(path + ": truncated optimizer state");
  const std::size_t payload_end = r.size() - 8;
  const std::uint64_t want = fnv1a64(r.data() + 4, payload_end - 4);

  if (r.u16() != 1) throw ValidationError(path + ": unsupported optimizer version");
  AdamState st;
  st.step = static_cast<long>(r.u64());
  const std::uint64_t n = r.u64();
  if (n > (1u << 26)) throw ValidationError(path + ": optimizer state too large");
  st.m.resize(n);
  st.v.resize(n);
  for (auto& v : st.m) v = r.f64();
  for (auto& v : st.v) v = r.f64();
  if (r.pos() != payload_end) throw ValidationError(path + ": trailing optimizer bytes");
  if (r.u64() != want) throw ValidationError(path + ": optimizer checksum mismatch");
  return st;
}

namespace {

void write_pgm_impl(const std::string& path, const RealGrid& g) {
  double peak = 0.0;
  for (double v : g.values) peak = std::max(peak, v);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  f << "P5\n" << g.width << " " << g.height << "\n255\n";
  for (double v : g.values) {
    const int q = peak > 0.0 ? static_cast<int>(std::lround(255.0 * std::clamp(v / peak, 0.0, 1.0)))
                             : 0;
    f.put(static_cast<char>(q));
  }
  if (!f) throw ValidationError("write failed: " + path);
}

}  // namespace

void write_pgm(const std::string& path, const ComplexGrid& g) {
  write_pgm_impl(path, magnitude(g));
}

void write_pgm(const std::string& path, const RealGrid& g) { write_pgm_impl(path, g); }

void write_train_log_csv(const std::string& path, const TrainLog& log) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  f << "step,e_true,e_fake,gap,grad_norm\n";
  f.precision(17);
  for (const auto& r : log.records) {
    f << r.step << "," << r.e_true << "," << r.e_fake << "," << r.gap << "," << r.grad_norm
      << "\n";
  }
  if (!f) throw ValidationError("write failed: " + path);
}

void write_cost_trace_csv(const std::string& path, const std::vector<double>& trace) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  f << "iteration,cost\n";
  f.precision(17);
  for (std::size_t i = 0; i < trace.size(); ++i) f << i << "," << trace[i] << "\n";
  if (!f) throw ValidationError("write failed: " + path);
}

void write_key_values(const std::string& path,
                      std::vector<std::pair<std::string, std::string>> entries) {
  std::sort(entries.begin(), entries.end());
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  for (const auto& [k, v] : entries) f << k << "=" << v << "\n";
  if (!f) throw ValidationError("write failed: " + path);
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(path + ": malformed line: " + line);
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

}  // namespace deepen
