#include "bevcv/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "bevcv/error.hpp"

namespace bevcv {

ImageRaster::ImageRaster(int w, int h, int c)
    : ImageRaster(w, h, c,
                  std::vector<std::uint8_t>(
                      static_cast<std::size_t>(std::max(w, 0)) *
                      std::max(h, 0) * std::max(c, 0))) {}

ImageRaster::ImageRaster(int w, int h, int c, std::vector<std::uint8_t> bytes)
    : width(w), height(h), channels(c), data(std::move(bytes)) {
  if (w < 1 || h < 1 || c < 1) {
    throw InvalidArgument("raster extents must be positive, got " +
                          std::to_string(w) + "x" + std::to_string(h) + "x" +
                          std::to_string(c));
  }
  if (data.size() != static_cast<std::size_t>(w) * h * c) {
    throw InvalidArgument("raster data length does not match extents");
  }
}

void CropSpec::validate() const {
  if (!(fov_deg > 0.0 && fov_deg <= 360.0)) {
    throw ValidationError("fov_deg", "must lie in (0, 360]");
  }
  if (!std::isfinite(yaw_deg)) {
    throw ValidationError("yaw_deg", "must be finite");
  }
}

namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G',
                                           '\r', '\n', 0x1a, '\n'};

// Reads the next whitespace-delimited token of a PNM header, skipping
// comments. Returns the offset just past the token.
std::size_t pnm_token(std::span<const std::uint8_t> bytes, std::size_t pos,
                      std::string& token) {
  token.clear();
  while (pos < bytes.size()) {
    const char ch = static_cast<char>(bytes[pos]);
    if (ch == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      ++pos;
    } else {
      break;
    }
  }
  while (pos < bytes.size() &&
         !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    token.push_back(static_cast<char>(bytes[pos++]));
  }
  if (token.empty()) throw MalformedImage("truncated PPM header");
  return pos;
}

int parse_dim(const std::string& tok, const char* what) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), ::isdigit) ||
      tok.size() > 9) {
    throw MalformedImage(std::string("bad PPM ") + what + " '" + tok + "'");
  }
  return std::stoi(tok);
}

ImageRaster decode_ppm(std::span<const std::uint8_t> bytes) {
  std::string tok;
  std::size_t pos = pnm_token(bytes, 0, tok);
  if (tok != "P6") throw UnsupportedFormat("only binary PPM (P6) is supported");
  pos = pnm_token(bytes, pos, tok);
  const int w = parse_dim(tok, "width");
  pos = pnm_token(bytes, pos, tok);
  const int h = parse_dim(tok, "height");
  pos = pnm_token(bytes, pos, tok);
  const int maxval = parse_dim(tok, "maxval");
  if (w < 1 || h < 1) throw MalformedImage("PPM extents must be positive");
  if (maxval < 1 || maxval > 65535) throw MalformedImage("bad PPM maxval");
  if (maxval > 255) throw UnsupportedFormat("16-bit PPM is not supported");
  // Exactly one whitespace byte separates the header from the samples.
  if (pos >= bytes.size()) throw MalformedImage("truncated PPM header");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - pos < need) {
    throw MalformedImage("PPM pixel data truncated: expected " +
                         std::to_string(need) + " bytes, found " +
                         std::to_string(bytes.size() - pos));
  }
  std::vector<std::uint8_t> px(bytes.begin() + pos, bytes.begin() + pos + need);
  if (maxval != 255) {
    for (auto& v : px) {
      v = static_cast<std::uint8_t>(
          std::lround(std::min<int>(v, maxval) * 255.0 / maxval));
    }
  }
  return ImageRaster(w, h, 3, std::move(px));
}

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->bytes.size() - st->pos < n) png_error(png, "truncated PNG stream");
  std::memcpy(out, st->bytes.data() + st->pos, n);
  st->pos += n;
}

void png_throw(png_structp png, png_const_charp msg) {
  *static_cast<std::string*>(png_get_error_ptr(png)) = msg;
  png_longjmp(png, 1);
}

ImageRaster decode_png(std::span<const std::uint8_t> bytes) {
  std::string err;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_throw, nullptr);
  if (!png) throw MalformedImage("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  PngReadState state{bytes, 0};
  // Everything the error path touches lives above setjmp.
  std::vector<std::uint8_t> rgb;
  std::vector<png_bytep> rows;
  png_uint_32 w = 0, h = 0;
  volatile bool sixteen = false;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw MalformedImage("invalid PNG: " + err);
  }
  png_set_read_fn(png, &state, png_read_from_span);
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth == 16) {
    sixteen = true;
  } else {
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
      png_set_expand_gray_1_2_4_to_8(png);
    }
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_gray_to_rgb(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    if (png_get_rowbytes(png, info) != static_cast<png_size_t>(w) * 3) {
      png_error(png, "unexpected row layout");
    }
    rgb.resize(static_cast<std::size_t>(w) * h * 3);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = rgb.data() + y * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (sixteen) throw UnsupportedFormat("16-bit PNG is not supported");
  return ImageRaster(static_cast<int>(w), static_cast<int>(h), 3,
                     std::move(rgb));
}

}  // namespace

ImageRaster decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 8 && std::equal(bytes.begin(), bytes.begin() + 8,
                                      std::begin(kPngSignature))) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P') {
    return decode_ppm(bytes);
  }
  if (bytes.empty()) throw MalformedImage("empty image file");
  throw UnsupportedFormat("unrecognised image signature");
}

ImageRaster load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

std::vector<std::uint8_t> encode_ppm(const ImageRaster& img) {
  if (img.channels != 3) throw InvalidArgument("PPM output needs 3 channels");
  const std::string header = "P6\n" + std::to_string(img.width) + " " +
                             std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

void write_ppm(const std::filesystem::path& path, const ImageRaster& img) {
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

int crop_width(int pano_width, double fov_deg) {
  const auto w = static_cast<int>(std::lround(pano_width * fov_deg / 360.0));
  return std::clamp(w, 1, pano_width);
}

ImageRaster fov_crop(const ImageRaster& pano, const CropSpec& crop) {
  crop.validate();
  const int W = pano.width;
  const int w = crop_width(W, crop.fov_deg);
  // nearbyint rounds half to even, so shift(-yaw) == -shift(yaw) exactly.
  const double turns = std::fmod(crop.yaw_deg, 360.0) / 360.0;
  const auto shift = static_cast<long long>(std::nearbyint(turns * W));
  const long long start = shift + (W - w) / 2;

  ImageRaster out(w, pano.height, pano.channels);
  const std::size_t px = pano.channels;
  for (int x = 0; x < w; ++x) {
    const auto src = static_cast<int>(((start + x) % W + W) % W);
    for (int y = 0; y < pano.height; ++y) {
      std::copy_n(&pano.data[(static_cast<std::size_t>(y) * W + src) * px], px,
                  &out.data[(static_cast<std::size_t>(y) * w + x) * px]);
    }
  }
  return out;
}

ImageRaster resize_bilinear(const ImageRaster& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) {
    throw InvalidArgument("resize target must be at least 1x1");
  }
  if (out_w == img.width && out_h == img.height) return img;

  struct Tap {
    int i0, i1;
    double t;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> v(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      const double s =
          std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
      const int i0 = static_cast<int>(std::floor(s));
      const int i1 = std::min(i0 + 1, in - 1);
      v[o] = {i0, i1, s - i0};
    }
    return v;
  };
  const auto xs = taps(img.width, out_w);
  const auto ys = taps(img.height, out_h);

  ImageRaster out(out_w, out_h, img.channels);
  for (int y = 0; y < out_h; ++y) {
    const Tap& ty = ys[y];
    for (int x = 0; x < out_w; ++x) {
      const Tap& tx = xs[x];
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1.0 - tx.t) * img.at(tx.i0, ty.i0, c) +
                           tx.t * img.at(tx.i1, ty.i0, c);
        const double bot = (1.0 - tx.t) * img.at(tx.i0, ty.i1, c) +
                           tx.t * img.at(tx.i1, ty.i1, c);
        const double v = (1.0 - ty.t) * top + ty.t * bot;
        out.at(x, y, c) =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace bevcv
