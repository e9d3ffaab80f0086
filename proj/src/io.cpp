// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

namespace torf {

namespace {

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

std::string pfm_magic(int channels) {
  if (channels == 1) return "Pf";
  if (channels == 3) return "PF";
  return "PF" + std::to_string(channels);
}

int pfm_channels(const std::string& magic) {
  if (magic == "Pf") return 1;
  if (magic == "PF") return 3;
  if (magic.size() > 2 && magic.compare(0, 2, "PF") == 0) {
    const std::string digits = magic.substr(2);
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      const int n = std::stoi(digits);
      if (n >= 1 && n <= 64) return n;
    }
  }
  return 0;
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << pfm_magic(image.channels()) << "\n" << image.width() << " " << image.height() << "\n-1.0\n";
  const int rowlen = image.width() * image.channels();
  std::vector<std::uint32_t> row(rowlen);
  for (int y = image.height() - 1; y >= 0; --y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        const float f = static_cast<float>(image(x, y, c));
        std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
        if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
        row[x * image.channels() + c] = bits;
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), rowlen * 4);
  }
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

Image read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in) throw FormatError("'" + path.string() + "': malformed PFM header");
  const int channels = pfm_channels(magic);
  if (channels == 0) throw FormatError("'" + path.string() + "': unknown PFM magic '" + magic + "'");
  if (width <= 0 || height <= 0 || scale == 0.0)
    throw FormatError("'" + path.string() + "': invalid PFM dimensions or scale");
  in.get();  // single whitespace byte after the scale
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);
  Image image(width, height, channels);
  const int rowlen = width * channels;
  std::vector<std::uint32_t> row(rowlen);
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(rowlen) * 4);
    if (!in) throw FormatError("'" + path.string() + "': truncated PFM data");
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        std::uint32_t bits = row[x * channels + c];
        if (swap) bits = byteswap32(bits);
        image(x, y, c) = static_cast<double>(std::bit_cast<float>(bits));
      }
    }
  }
  return image;
}

namespace {

void write_png_rgb8(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw FormatError("cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw FormatError("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("libpng: failed writing '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_png_rgb(const std::filesystem::path& path, const Image& rgb) {
  if (rgb.channels() != 3) throw FormatError("write_png_rgb: expected 3 channels");
  std::vector<std::uint8_t> px(rgb.pixel_count() * 3);
  for (int y = 0; y < rgb.height(); ++y)
    for (int x = 0; x < rgb.width(); ++x)
      for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(y) * rgb.width() + x) * 3 + c] = to_byte(rgb(x, y, c));
  write_png_rgb8(path, rgb.width(), rgb.height(), px);
}

void write_png_signed(const std::filesystem::path& path, const Image& image) {
  const int panels = image.channels();
  const int out_w = image.width() * panels;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(out_w) * image.height() * 3, 0);
  for (int c = 0; c < panels; ++c) {
    double peak = 0.0;
    for (int y = 0; y < image.height(); ++y)
      for (int x = 0; x < image.width(); ++x) peak = std::max(peak, std::abs(image(x, y, c)));
    if (peak == 0.0) peak = 1.0;
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        const double v = image(x, y, c) / peak;
        std::uint8_t* p = &px[(static_cast<std::size_t>(y) * out_w + c * image.width() + x) * 3];
        if (v > 0.0) p[0] = to_byte(v);
        if (v < 0.0) p[2] = to_byte(-v);
      }
    }
  }
  write_png_rgb8(path, out_w, image.height(), px);
}

void write_png_gray(const std::filesystem::path& path, const Image& image, double max_value) {
  if (!(max_value > 0.0)) max_value = 1.0;
  std::vector<std::uint8_t> px(image.pixel_count() * 3);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const std::uint8_t g = to_byte(image(x, y, 0) / max_value);
      std::uint8_t* p = &px[(static_cast<std::size_t>(y) * image.width() + x) * 3];
      p[0] = p[1] = p[2] = g;
    }
  }
  write_png_rgb8(path, image.width(), image.height(), px);
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << "\n";
}

nlohmann::json to_json(const Intrinsics& in) {
  return {{"fx", in.fx}, {"fy", in.fy}, {"cx", in.cx}, {"cy", in.cy},
          {"width", in.width}, {"height", in.height}};
}

Intrinsics intrinsics_from_json(const nlohmann::json& j) {
  Intrinsics in;
  in.fx = j.at("fx").get<double>();
  in.fy = j.at("fy").get<double>();
  in.cx = j.at("cx").get<double>();
  in.cy = j.at("cy").get<double>();
  in.width = j.at("width").get<int>();
  in.height = j.at("height").get<int>();
  in.validate();
  return in;
}

nlohmann::json to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-vector, got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json to_json(const Pose& pose) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    rows.push_back({pose.rotation(r, 0), pose.rotation(r, 1), pose.rotation(r, 2)});
  return {{"convention", "camera-to-world"}, {"rotation", rows}, {"translation", to_json(pose.translation)}};
}

Pose pose_from_json(const nlohmann::json& j) {
  if (j.contains("convention") && j.at("convention") != "camera-to-world")
    throw FormatError("unsupported pose convention " + j.at("convention").dump());
  Pose pose;
  const auto& rows = j.at("rotation");
  if (!rows.is_array() || rows.size() != 3) throw FormatError("pose rotation must be 3x3");
  for (int r = 0; r < 3; ++r) pose.rotation.row(r) = vec3_from_json(rows[r]).transpose();
  pose.translation = vec3_from_json(j.at("translation"));
  pose.validate();
  return pose;
}

}  // namespace torf
