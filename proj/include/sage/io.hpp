#ifndef SAGE_IO_HPP
#define SAGE_IO_HPP

// File formats:
//   SALM  "SALM" | u32 height | u32 width | height*width f32, row-major
//   SGMD  "SGMD" | u32 d | u32 hidden | u32 classes | f32 parameters in order
//         w1 (hidden x 3d^2, row-major), b1 (hidden), w2 (classes x hidden), b2 (classes)
// All integers and floats little-endian. PNG images are 8-bit RGB.

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <json.hpp>

#include "sage/core.hpp"
#include "sage/model.hpp"

namespace sage::io {

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

inline void put_f32(std::vector<unsigned char>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
public:
    Reader(const std::vector<unsigned char>& bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}

    void expect_magic(const char (&magic)[5]) {
        need(4);
        if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0) {
            throw IoError(name_ + ": bad magic, expected " + std::string(magic, 4));
        }
        pos_ += 4;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes_[pos_ + b]) << (8 * b);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    void expect_end() const {
        if (pos_ != bytes_.size()) throw IoError(name_ + ": unexpected trailing bytes");
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw IoError(name_ + ": truncated file");
    }
    const std::vector<unsigned char>& bytes_;
    std::string name_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path.string() + ": write failed");
}

// ---- SALM ----

template <typename T>
std::vector<unsigned char> encode_salm(const Plane<T>& plane) {
    std::vector<unsigned char> out{'S', 'A', 'L', 'M'};
    const auto d = static_cast<std::uint32_t>(plane.size());
    detail::put_u32(out, d);
    detail::put_u32(out, d);
    for (T v : plane.values()) detail::put_f32(out, static_cast<float>(v));
    return out;
}

/// Decodes a square SALM map; `name` labels error messages.
inline Plane<float> decode_salm(const std::vector<unsigned char>& bytes, const std::string& name) {
    detail::Reader r(bytes, name);
    r.expect_magic("SALM");
    const std::uint32_t h = r.u32();
    const std::uint32_t w = r.u32();
    if (h != w) throw IoError(name + ": saliency map is not square");
    if (r.remaining() != static_cast<std::size_t>(h) * w * 4) {
        throw IoError(name + (r.remaining() < static_cast<std::size_t>(h) * w * 4 ? ": truncated file"
                                                                                   : ": unexpected trailing bytes"));
    }
    Plane<float> plane(h);
    for (float& v : plane.values()) v = r.f32();
    r.expect_end();
    return plane;
}

inline SaliencyMap read_salm(const std::filesystem::path& path) {
    const auto plane = decode_salm(read_bytes(path), path.string());
    try {
        return SaliencyMap(plane);
    } catch (const ValidationError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

template <typename T>
void write_salm(const std::filesystem::path& path, const Plane<T>& plane) {
    write_bytes(path, encode_salm(plane));
}

// ---- SGMD checkpoint ----

/// Input side d is recovered from the input width 3d^2.
inline std::vector<unsigned char> encode_checkpoint(const ClassifierState& model) {
    const auto& shape = model.shape();
    const auto d = static_cast<std::uint32_t>(std::lround(std::sqrt(static_cast<double>(shape.inputs / kChannels))));
    if (static_cast<std::size_t>(d) * d * kChannels != shape.inputs) {
        throw ArgumentError("checkpoint: model input is not a d x d x 3 image");
    }
    std::vector<unsigned char> out{'S', 'G', 'M', 'D'};
    detail::put_u32(out, d);
    detail::put_u32(out, static_cast<std::uint32_t>(shape.hidden));
    detail::put_u32(out, static_cast<std::uint32_t>(shape.classes));
    model.params().for_each([&](const std::vector<float>& t) {
        for (float v : t) detail::put_f32(out, v);
    });
    return out;
}

inline ClassifierState decode_checkpoint(const std::vector<unsigned char>& bytes, const std::string& name) {
    detail::Reader r(bytes, name);
    r.expect_magic("SGMD");
    const std::uint32_t d = r.u32();
    const std::uint32_t hidden = r.u32();
    const std::uint32_t classes = r.u32();
    if (d < 2 || hidden == 0 || classes == 0) throw IoError(name + ": invalid checkpoint dimensions");
    const auto shape = ClassifierState::image_shape(d, hidden, classes);
    if (r.remaining() != shape.parameter_count() * 4) {
        throw IoError(name + (r.remaining() < shape.parameter_count() * 4 ? ": truncated file"
                                                                          : ": unexpected trailing bytes"));
    }
    auto params = MlpTensors<float>::zeros(shape);
    params.for_each([&](std::vector<float>& t) {
        for (float& v : t) {
            v = r.f32();
            if (!std::isfinite(v)) throw IoError(name + ": non-finite parameter");
        }
    });
    r.expect_end();
    return ClassifierState(shape, std::move(params));
}

inline ClassifierState read_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_bytes(path), path.string());
}

inline void write_checkpoint(const std::filesystem::path& path, const ClassifierState& model) {
    write_bytes(path, encode_checkpoint(model));
}

// ---- PNG ----

inline std::uint8_t to_byte(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

/// Any PNG is converted to 8-bit RGB; channel values map to v / 255.
inline ImageTensor read_png(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw IoError(path.string() + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw IoError(path.string() + ": " + msg);
    }
    if (image.width != image.height) {
        throw IoError(path.string() + ": image is " + std::to_string(image.width) + "x" +
                      std::to_string(image.height) + ", expected square");
    }
    if (image.width < 2) throw IoError(path.string() + ": image too small");
    std::vector<float> values(buffer.size());
    for (std::size_t k = 0; k < buffer.size(); ++k) values[k] = static_cast<float>(buffer[k]) / 255.0f;
    return ImageTensor::from_values(image.width, std::move(values));
}

/// Writes an arbitrary-size 8-bit RGB buffer (row-major, 3 bytes per pixel).
inline void write_png_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height,
                          const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != width * height * 3) throw ArgumentError("write_png: buffer size mismatch");
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr)) {
        throw IoError(path.string() + ": " + image.message);
    }
}

inline void write_png(const std::filesystem::path& path, const ImageTensor& img) {
    std::vector<std::uint8_t> rgb(img.values().size());
    for (std::size_t k = 0; k < rgb.size(); ++k) rgb[k] = to_byte(img.values()[k]);
    write_png_rgb(path, img.size(), img.size(), rgb);
}

// ---- config ----

/// Keys mirror SageConfig field names; absent keys keep their defaults, unknown keys are rejected.
inline SageConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw IoError("config: expected a JSON object");
    SageConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "sigma2") cfg.sigma2 = value.get<double>();
        else if (key == "zeta") cfg.zeta = value.get<double>();
        else if (key == "u") cfg.u = value.get<double>();
        else if (key == "eta") cfg.eta = value.get<double>();
        else if (key == "search_fraction") cfg.search_fraction = value.get<double>();
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else throw IoError("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

inline nlohmann::json config_to_json(const SageConfig& cfg) {
    return {{"sigma2", cfg.sigma2}, {"zeta", cfg.zeta},       {"u", cfg.u},
            {"eta", cfg.eta},       {"search_fraction", cfg.search_fraction}, {"seed", cfg.seed}};
}

inline SageConfig read_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string() + ": cannot open for reading");
    try {
        return config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    } catch (const ArgumentError& e) {
        throw IoError(path.string() + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out << text;
    if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace sage::io

#endif  // SAGE_IO_HPP
