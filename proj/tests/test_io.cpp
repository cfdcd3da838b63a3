#include <doctest.h>

#include <cstring>
#include <functional>
#include <limits>
#include <random>

#include "flowdepth/error.hpp"
#include "flowdepth/io.hpp"

using namespace flowdepth;
using namespace std::string_literals;

namespace {

FormatErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("no FormatError");
  return FormatErrorKind::io;
}

std::vector<std::uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("flow round-trips at float precision and keeps invalid pixels") {
  FlowField f(5, 7);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> d(-40.0f, 40.0f);
  for (double& x : f.u.values()) x = d(rng);
  for (double& x : f.v.values()) x = d(rng);
  f.valid(2, 3) = 0;
  const FlowField g = decode_flow(encode_flow(f));
  CHECK(g.valid == f.valid);
  for (std::size_t i = 0; i < f.u.size(); ++i)
    if (f.valid.data()[i]) {
      CHECK(g.u.data()[i] == f.u.data()[i]);
      CHECK(g.v.data()[i] == f.v.data()[i]);
    }
  CHECK(encode_flow(g) == encode_flow(f));
}

TEST_CASE("flow decoder rejects malformed input") {
  const auto good = encode_flow(FlowField(2, 3));
  auto bad = good;
  bad[0] = 'X';
  CHECK(kind_of([&] { decode_flow(bad); }) == FormatErrorKind::bad_magic);
  CHECK(kind_of([&] { decode_flow(std::span(good).first(good.size() - 1)); }) == FormatErrorKind::truncated);
  CHECK(kind_of([&] { decode_flow(std::span(good).first(6)); }) == FormatErrorKind::truncated);
  auto extra = good;
  extra.push_back(0);
  CHECK(kind_of([&] { decode_flow(extra); }) == FormatErrorKind::bad_header);
  auto huge = good;
  const std::int32_t big = 1 << 30;
  std::memcpy(huge.data() + 4, &big, 4);
  CHECK(kind_of([&] { decode_flow(huge); }) == FormatErrorKind::dimension_overflow);
  auto negative = good;
  const std::int32_t neg = -3;
  std::memcpy(negative.data() + 8, &neg, 4);
  CHECK(kind_of([&] { decode_flow(negative); }) != FormatErrorKind::io);
  FlowField nan_flow(1, 1);
  nan_flow.u.fill(std::numeric_limits<double>::quiet_NaN());
  CHECK(kind_of([&] { encode_flow(nan_flow); }) == FormatErrorKind::non_finite);
}

TEST_CASE("pfm round-trips and reads big-endian files") {
  DepthMap d(3, 4);
  for (int v = 0; v < 3; ++v)
    for (int u = 0; u < 4; ++u) d(u, v) = static_cast<float>(1.5 + u + 10 * v);
  const auto enc = encode_pfm(d);
  CHECK(decode_pfm(enc) == d);
  const std::string head = "Pf\n4 3\n-1.0\n";
  CHECK(std::string(enc.begin(), enc.begin() + static_cast<long>(head.size())) == head);
  std::vector<std::uint8_t> be = bytes("Pf\n4 3\n1.0\n");
  for (std::size_t i = head.size(); i < enc.size(); i += 4)
    for (int k = 3; k >= 0; --k) be.push_back(enc[i + static_cast<std::size_t>(k)]);
  CHECK(decode_pfm(be) == d);
  DepthMap bad = d;
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK(kind_of([&] { encode_pfm(bad); }) == FormatErrorKind::non_finite);
  CHECK(kind_of([&] { decode_pfm(bytes("PF\n4 3\n-1.0\n")); }) == FormatErrorKind::bad_magic);
  CHECK(kind_of([&] { decode_pfm(bytes("Pf\n4 x\n-1.0\n")); }) == FormatErrorKind::bad_header);
  CHECK(kind_of([&] { decode_pfm(bytes("Pf\n4 3\n-1.0\nabc")); }) == FormatErrorKind::truncated);
  CHECK(kind_of([&] { decode_pfm(bytes("Pf\n70000 1\n-1.0\n")); }) == FormatErrorKind::dimension_overflow);
}

TEST_CASE("pnm round-trips at 16-bit precision") {
  for (int channels : {1, 3}) {
    Image img(4, 5, channels);
    for (int c = 0; c < channels; ++c)
      for (int v = 0; v < 4; ++v)
        for (int u = 0; u < 5; ++u) img.channel(c)(u, v) = static_cast<double>((u * 7919 + v * 104729 + c * 31) % 65536) / 65535.0;
    const auto enc = encode_pnm(img);
    CHECK(decode_pnm(enc) == img);
    CHECK(encode_pnm(decode_pnm(enc)) == enc);
  }
  Image out(1, 1, 1, 1.5);
  CHECK_THROWS_AS(encode_pnm(out), InvalidArgumentError);
  const Image eight = decode_pnm(bytes("P5\n# comment\n2 1\n255\n\x00\xff"s));
  CHECK(eight.channel(0)(0, 0) == 0.0);
  CHECK(eight.channel(0)(1, 0) == 1.0);
  CHECK(kind_of([&] { decode_pnm(bytes("P4\n2 1\n255\n")); }) == FormatErrorKind::bad_magic);
  CHECK(kind_of([&] { decode_pnm(bytes("P5\n2 1\n70000\n")); }) == FormatErrorKind::bad_header);
  CHECK(kind_of([&] { decode_pnm(bytes("P5\n2 1\n255\n\x01")); }) == FormatErrorKind::truncated);
  CHECK(kind_of([&] { decode_pnm(bytes("")); }) != FormatErrorKind::io);
}

TEST_CASE("random bytes never crash the decoders") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> len(0, 64), byte(0, 255);
  const std::vector<std::string> prefixes{"", "PIEH", "Pf\n", "P5\n", "P6\n3 2\n"};
  for (int i = 0; i < 3000; ++i) {
    std::vector<std::uint8_t> b = bytes(prefixes[static_cast<std::size_t>(i) % prefixes.size()]);
    const int n = len(rng);
    for (int k = 0; k < n; ++k) b.push_back(static_cast<std::uint8_t>(byte(rng)));
    for (auto fn : {+[](std::span<const std::uint8_t> s) { (void)decode_flow(s); },
                    +[](std::span<const std::uint8_t> s) { (void)decode_pfm(s); },
                    +[](std::span<const std::uint8_t> s) { (void)decode_pnm(s); }}) {
      try {
        fn(b);
      } catch (const Error&) {
      }
    }
  }
}

TEST_CASE("numbers and csv") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) CHECK(std::stod(format_number(x)) == x);
  CHECK(format_number(2.0) == "2");
  const std::string csv = format_csv({"a", "b"}, {{"1", "x,y"}, {"q\"t", "line\nbreak"}});
  CHECK(csv == "a,b\n1,\"x,y\"\n\"q\"\"t\",\"line\nbreak\"\n");
  CHECK_THROWS_AS(format_csv({"a"}, {{"1", "2"}}), InvalidArgumentError);
  CHECK(kind_of([] { read_bytes("/nonexistent/dir/file"); }) == FormatErrorKind::io);
}
