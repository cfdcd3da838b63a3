#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowdepth/grid.hpp"

namespace flowdepth {

// Binary formats. Encoders and decoders work on byte buffers; the file
// functions wrap them. Every decoder reports malformed input as FormatError.

/// Middlebury .flo: "PIEH", int32 width, int32 height, then float32 (u, v)
/// pairs row-major, all little-endian. Invalid pixels are stored as 1e10
/// and any component above 1e9 in magnitude reads back as invalid.
std::vector<std::uint8_t> encode_flow(const FlowField& flow);
FlowField decode_flow(std::span<const std::uint8_t> bytes);
void write_flow(const std::string& path, const FlowField& flow);
FlowField read_flow(const std::string& path);

/// Grayscale PFM with a negative (little-endian) scale, rows bottom-up.
/// Big-endian files (positive scale) are read as well. NaN and infinities
/// are rejected in both directions.
std::vector<std::uint8_t> encode_pfm(const DepthMap& depth);
DepthMap decode_pfm(std::span<const std::uint8_t> bytes);
void write_depth_pfm(const std::string& path, const DepthMap& depth);
DepthMap read_depth_pfm(const std::string& path);

/// Binary PGM (1 channel) or PPM (3 channels) with maxval 65535 and
/// round(v * 65535) samples. Readers accept any maxval in [1, 65535].
std::vector<std::uint8_t> encode_pnm(const Image& image);
Image decode_pnm(std::span<const std::uint8_t> bytes);
void write_image_pnm(const std::string& path, const Image& image);
Image read_image_pnm(const std::string& path);

/// Shortest decimal form that reads back to the same double.
std::string format_number(double x);

/// Comma-separated rows under a header line, '\n' terminated. Fields with
/// commas, quotes or newlines are quoted.
std::string format_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::vector<std::uint8_t> read_bytes(const std::string& path);
void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes);
void write_text(const std::string& path, const std::string& text);

}  // namespace flowdepth
