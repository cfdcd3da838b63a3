#include "flowdepth/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string_view>

namespace flowdepth {

namespace {

constexpr long kMaxSide = 1 << 16;
constexpr long kMaxPixels = 1L << 28;
constexpr float kUnknownFlow = 1e10f;

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
}

std::uint32_t get_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint32_t get_u32_be(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[3]) | static_cast<std::uint32_t>(p[2]) << 8 |
         static_cast<std::uint32_t>(p[1]) << 16 | static_cast<std::uint32_t>(p[0]) << 24;
}

void put_f32_le(std::vector<std::uint8_t>& out, float x) { put_u32_le(out, std::bit_cast<std::uint32_t>(x)); }

void check_dimensions(long width, long height, const char* what) {
  if (width <= 0 || height <= 0 || width > kMaxSide || height > kMaxSide || width * height > kMaxPixels)
    throw FormatError(FormatErrorKind::dimension_overflow,
                      std::string(what) + ": unsupported dimensions " + std::to_string(width) + " x " +
                          std::to_string(height));
}

/// Whitespace-separated header tokens of a netpbm-style header, with '#'
/// comments. Stops after `count` tokens and one whitespace byte.
class HeaderReader {
 public:
  HeaderReader(std::span<const std::uint8_t> bytes, const char* what) : bytes_(bytes), what_(what) {}

  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (pos_ < bytes_.size() && !is_space(bytes_[pos_])) {
      out.push_back(static_cast<char>(bytes_[pos_++]));
      if (out.size() > 32) fail("header token too long");
    }
    if (out.empty()) throw FormatError(FormatErrorKind::truncated, std::string(what_) + ": truncated header");
    return out;
  }

  long integer() {
    const std::string t = token();
    long value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size()) fail("bad integer '" + t + "'");
    return value;
  }

  double real() {
    const std::string t = token();
    double value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(value)) fail("bad number '" + t + "'");
    return value;
  }

  /// Consumes the single whitespace byte that ends the header.
  std::size_t payload_offset() {
    if (pos_ >= bytes_.size()) throw FormatError(FormatErrorKind::truncated, std::string(what_) + ": no payload");
    if (!is_space(bytes_[pos_])) fail("header must end in whitespace");
    return pos_ + 1;
  }

 private:
  static bool is_space(std::uint8_t c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; }
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(FormatErrorKind::bad_header, std::string(what_) + ": " + msg);
  }

  std::span<const std::uint8_t> bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

void append_text(std::vector<std::uint8_t>& out, std::string_view text) { out.insert(out.end(), text.begin(), text.end()); }

}  // namespace

// ---------------------------------------------------------------------------
// .flo

std::vector<std::uint8_t> encode_flow(const FlowField& flow) {
  const int h = flow.height(), w = flow.width();
  check_dimensions(w, h, "flo");
  std::vector<std::uint8_t> out;
  out.reserve(12 + 8 * flow.u.size());
  append_text(out, "PIEH");
  put_u32_le(out, static_cast<std::uint32_t>(w));
  put_u32_le(out, static_cast<std::uint32_t>(h));
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const bool valid = flow.valid.empty() || flow.valid(u, v);
      if (valid && (!std::isfinite(flow.u(u, v)) || !std::isfinite(flow.v(u, v))))
        throw FormatError(FormatErrorKind::non_finite, "flo: non-finite flow at a valid pixel");
      put_f32_le(out, valid ? static_cast<float>(flow.u(u, v)) : kUnknownFlow);
      put_f32_le(out, valid ? static_cast<float>(flow.v(u, v)) : kUnknownFlow);
    }
  return out;
}

FlowField decode_flow(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw FormatError(FormatErrorKind::truncated, "flo: file shorter than its header");
  if (std::memcmp(bytes.data(), "PIEH", 4) != 0) throw FormatError(FormatErrorKind::bad_magic, "flo: bad magic tag");
  const long w = static_cast<std::int32_t>(get_u32_le(bytes.data() + 4));
  const long h = static_cast<std::int32_t>(get_u32_le(bytes.data() + 8));
  check_dimensions(w, h, "flo");
  const std::size_t expected = 12 + 8 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() < expected) throw FormatError(FormatErrorKind::truncated, "flo: truncated payload");
  if (bytes.size() > expected) throw FormatError(FormatErrorKind::bad_header, "flo: trailing bytes after payload");
  FlowField flow(static_cast<int>(h), static_cast<int>(w));
  const std::uint8_t* p = bytes.data() + 12;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u, p += 8) {
      const float fu = std::bit_cast<float>(get_u32_le(p));
      const float fv = std::bit_cast<float>(get_u32_le(p + 4));
      const bool valid = std::isfinite(fu) && std::isfinite(fv) && std::abs(fu) <= 1e9f && std::abs(fv) <= 1e9f;
      flow.u(u, v) = valid ? fu : 0.0;
      flow.v(u, v) = valid ? fv : 0.0;
      flow.valid(u, v) = valid ? 1 : 0;
    }
  return flow;
}

void write_flow(const std::string& path, const FlowField& flow) { write_bytes(path, encode_flow(flow)); }
FlowField read_flow(const std::string& path) { return decode_flow(read_bytes(path)); }

// ---------------------------------------------------------------------------
// PFM

std::vector<std::uint8_t> encode_pfm(const DepthMap& depth) {
  const int h = depth.height(), w = depth.width();
  check_dimensions(w, h, "pfm");
  std::vector<std::uint8_t> out;
  append_text(out, "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n");
  for (int v = h - 1; v >= 0; --v)
    for (int u = 0; u < w; ++u) {
      const float x = static_cast<float>(depth(u, v));
      if (!std::isfinite(x)) throw FormatError(FormatErrorKind::non_finite, "pfm: depth values must be finite");
      put_f32_le(out, x);
    }
  return out;
}

DepthMap decode_pfm(std::span<const std::uint8_t> bytes) {
  HeaderReader header(bytes, "pfm");
  const std::string magic = header.token();
  if (magic != "Pf") throw FormatError(FormatErrorKind::bad_magic, "pfm: expected grayscale 'Pf' magic");
  const long w = header.integer();
  const long h = header.integer();
  check_dimensions(w, h, "pfm");
  const double scale = header.real();
  if (scale == 0.0) throw FormatError(FormatErrorKind::bad_header, "pfm: scale must be non-zero");
  const std::size_t offset = header.payload_offset();
  const std::size_t expected = offset + 4 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() < expected) throw FormatError(FormatErrorKind::truncated, "pfm: truncated payload");
  if (bytes.size() > expected) throw FormatError(FormatErrorKind::bad_header, "pfm: trailing bytes after payload");
  DepthMap depth(static_cast<int>(h), static_cast<int>(w));
  const std::uint8_t* p = bytes.data() + offset;
  for (long v = h - 1; v >= 0; --v)
    for (int u = 0; u < w; ++u, p += 4) {
      const float x = std::bit_cast<float>(scale < 0.0 ? get_u32_le(p) : get_u32_be(p));
      if (!std::isfinite(x)) throw FormatError(FormatErrorKind::non_finite, "pfm: non-finite sample");
      depth(u, static_cast<int>(v)) = x;
    }
  return depth;
}

void write_depth_pfm(const std::string& path, const DepthMap& depth) { write_bytes(path, encode_pfm(depth)); }
DepthMap read_depth_pfm(const std::string& path) { return decode_pfm(read_bytes(path)); }

// ---------------------------------------------------------------------------
// PNM

std::vector<std::uint8_t> encode_pnm(const Image& image) {
  const int h = image.height(), w = image.width(), channels = image.channels();
  check_dimensions(w, h, "pnm");
  std::vector<std::uint8_t> out;
  append_text(out, std::string(channels == 1 ? "P5" : "P6") + "\n" + std::to_string(w) + " " + std::to_string(h) +
                       "\n65535\n");
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < channels; ++c) {
        const double x = image.channel(c)(u, v);
        if (!std::isfinite(x)) throw FormatError(FormatErrorKind::non_finite, "pnm: non-finite intensity");
        if (x < 0.0 || x > 1.0) throw InvalidArgumentError("pnm: intensities must lie in [0, 1]");
        const auto q = static_cast<std::uint16_t>(std::lround(x * 65535.0));
        out.push_back(static_cast<std::uint8_t>(q >> 8));
        out.push_back(static_cast<std::uint8_t>(q & 0xff));
      }
  return out;
}

Image decode_pnm(std::span<const std::uint8_t> bytes) {
  HeaderReader header(bytes, "pnm");
  const std::string magic = header.token();
  int channels = 0;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    throw FormatError(FormatErrorKind::bad_magic, "pnm: expected binary P5 or P6");
  const long w = header.integer();
  const long h = header.integer();
  check_dimensions(w, h, "pnm");
  const long maxval = header.integer();
  if (maxval < 1 || maxval > 65535) throw FormatError(FormatErrorKind::bad_header, "pnm: maxval out of range");
  const std::size_t offset = header.payload_offset();
  const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
  const std::size_t expected =
      offset + sample_bytes * static_cast<std::size_t>(channels) * static_cast<std::size_t>(w) *
                   static_cast<std::size_t>(h);
  if (bytes.size() < expected) throw FormatError(FormatErrorKind::truncated, "pnm: truncated payload");
  if (bytes.size() > expected) throw FormatError(FormatErrorKind::bad_header, "pnm: trailing bytes after payload");
  Image image(static_cast<int>(h), static_cast<int>(w), channels);
  const std::uint8_t* p = bytes.data() + offset;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < channels; ++c) {
        long q = *p++;
        if (sample_bytes == 2) q = (q << 8) | *p++;
        if (q > maxval) throw FormatError(FormatErrorKind::bad_header, "pnm: sample exceeds maxval");
        image.channel(c)(u, v) = static_cast<double>(q) / static_cast<double>(maxval);
      }
  return image;
}

void write_image_pnm(const std::string& path, const Image& image) { write_bytes(path, encode_pnm(image)); }
Image read_image_pnm(const std::string& path) { return decode_pnm(read_bytes(path)); }

// ---------------------------------------------------------------------------
// CSV and raw files

std::string format_number(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

namespace {

void append_field(std::string& out, const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

void append_row(std::string& out, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    append_field(out, row[i]);
  }
  out += '\n';
}

}  // namespace

std::string format_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  append_row(out, header);
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw InvalidArgumentError("csv: row width differs from the header");
    append_row(out, row);
  }
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  write_text(path, format_csv(header, rows));
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorKind::io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrorKind::io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatErrorKind::io, "write failed: " + path);
}

void write_text(const std::string& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace flowdepth
