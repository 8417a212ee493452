#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gwnet/error.hpp"
#include "gwnet/lstm.hpp"
#include "gwnet/model.hpp"
#include "gwnet/sampler.hpp"
#include "gwnet/tensor.hpp"

namespace gwnet {

// Bit-exact file formats. All multi-byte integers are little-endian and
// payloads are 32-bit IEEE-754, so files round-trip bitwise across platforms.

namespace io_detail {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void put_u8(std::ostream& os, std::uint8_t v) { put_bytes(os, &v, 1); }

inline void put_u16(std::ostream& os, std::uint16_t v) {
    const std::uint8_t b[2] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)};
    put_bytes(os, b, 2);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
    std::uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    put_bytes(os, b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    put_bytes(os, b, 8);
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

inline void get_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw FormatError(std::string("truncated file while reading ") + what);
}

inline std::uint8_t get_u8(std::istream& is, const char* what) {
    std::uint8_t v;
    get_bytes(is, &v, 1, what);
    return v;
}

inline std::uint16_t get_u16(std::istream& is, const char* what) {
    std::uint8_t b[2];
    get_bytes(is, b, 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
    std::uint8_t b[4];
    get_bytes(is, b, 4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline std::uint64_t get_u64(std::istream& is, const char* what) {
    std::uint8_t b[8];
    get_bytes(is, b, 8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline float get_f32(std::istream& is, const char* what) {
    return std::bit_cast<float>(get_u32(is, what));
}

// FNV-1a over payload bytes, used as the checkpoint trailer.
struct Fnv1a64 {
    std::uint64_t state = 0xcbf29ce484222325ULL;
    void update(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            state ^= b[i];
            state *= 0x100000001b3ULL;
        }
    }
};

inline std::uint32_t f32_bits(float v) { return std::bit_cast<std::uint32_t>(v); }

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Clip files: magic "GWFC", version u16, dtype u8 (0 = f32), rank u8,
// extents u32 each, then the row-major payload.

inline constexpr char kClipMagic[4] = {'G', 'W', 'F', 'C'};
inline constexpr std::uint16_t kClipVersion = 1;

inline void write_clip(const std::string& path, const ClipVolume<float>& clip) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    io_detail::put_bytes(os, kClipMagic, 4);
    io_detail::put_u16(os, kClipVersion);
    io_detail::put_u8(os, 0);  // dtype f32
    io_detail::put_u8(os, static_cast<std::uint8_t>(clip.voxels.rank()));
    for (std::size_t e : clip.voxels.shape()) io_detail::put_u32(os, static_cast<std::uint32_t>(e));
    for (std::size_t i = 0; i < clip.voxels.size(); ++i) io_detail::put_f32(os, clip.voxels[i]);
    if (!os) throw FormatError("write failure on '" + path + "'");
}

inline ClipVolume<float> read_clip(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open '" + path + "' for reading");
    char magic[4];
    io_detail::get_bytes(is, magic, 4, "clip magic");
    if (std::memcmp(magic, kClipMagic, 4) != 0)
        throw FormatError("'" + path + "' is not a clip file (bad magic)");
    const std::uint16_t version = io_detail::get_u16(is, "clip version");
    if (version != kClipVersion)
        throw FormatError("unsupported clip version " + std::to_string(version));
    const std::uint8_t dtype = io_detail::get_u8(is, "clip dtype");
    if (dtype != 0) throw FormatError("unsupported clip dtype tag " + std::to_string(dtype));
    const std::uint8_t rank = io_detail::get_u8(is, "clip rank");
    if (rank != 3) throw FormatError("clip file must hold a rank-3 volume, got rank " + std::to_string(rank));
    Shape shape(rank);
    for (std::uint8_t a = 0; a < rank; ++a) {
        shape[a] = io_detail::get_u32(is, "clip extents");
        if (shape[a] == 0) throw FormatError("clip extent of zero in '" + path + "'");
    }
    ClipVolume<float> clip;
    clip.voxels = Tensor<float>(shape, 0.0f);
    for (std::size_t i = 0; i < clip.voxels.size(); ++i)
        clip.voxels[i] = io_detail::get_f32(is, "clip payload");
    clip.source_id = std::filesystem::path(path).stem().string();
    return clip;
}

// ---------------------------------------------------------------------------
// Dataset manifests: one entry per line, "path<TAB>label<TAB>subject" with an
// optional fourth bbox-path column. Label indices are assigned by sorted
// label name, so they are stable under entry reordering.

struct ManifestEntry {
    std::string path;
    std::string label;
    std::string subject;
    std::string bbox_path;  // empty when absent
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::vector<std::string> labels;  // sorted, index = class id

    std::size_t label_index(const std::string& name) const {
        const auto it = std::lower_bound(labels.begin(), labels.end(), name);
        if (it == labels.end() || *it != name)
            throw InputError("label '" + name + "' not present in manifest");
        return static_cast<std::size_t>(it - labels.begin());
    }
};

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open manifest '" + path + "'");
    DatasetManifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (cols.size() < 3 || cols.size() > 4)
            throw FormatError("manifest '" + path + "' line " + std::to_string(lineno) +
                              ": expected 3 or 4 tab-separated columns");
        ManifestEntry e;
        e.path = cols[0];
        e.label = cols[1];
        e.subject = cols[2];
        if (cols.size() == 4) e.bbox_path = cols[3];
        if (e.path.empty() || e.label.empty())
            throw FormatError("manifest '" + path + "' line " + std::to_string(lineno) +
                              ": empty path or label");
        m.entries.push_back(std::move(e));
    }
    for (const ManifestEntry& e : m.entries) m.labels.push_back(e.label);
    std::sort(m.labels.begin(), m.labels.end());
    m.labels.erase(std::unique(m.labels.begin(), m.labels.end()), m.labels.end());
    return m;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    for (const ManifestEntry& e : entries) {
        os << e.path << '\t' << e.label << '\t' << e.subject;
        if (!e.bbox_path.empty()) os << '\t' << e.bbox_path;
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// PGM (P5) frames, 8-bit grayscale, scaled to [0,1].

template <typename T = float>
Tensor<T> read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open frame '" + path + "'");
    std::string magic;
    is >> magic;
    if (magic != "P5") throw FormatError("'" + path + "' is not a binary PGM (P5) file");
    auto next_int = [&]() -> long {
        // Skip whitespace and '#' comment lines between header fields.
        while (true) {
            const int c = is.peek();
            if (c == '#') {
                std::string comment;
                std::getline(is, comment);
            } else if (std::isspace(c)) {
                is.get();
            } else {
                break;
            }
        }
        long v = -1;
        is >> v;
        if (!is || v < 0) throw FormatError("malformed PGM header in '" + path + "'");
        return v;
    };
    const long w = next_int();
    const long h = next_int();
    const long maxval = next_int();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw FormatError("unsupported PGM geometry in '" + path + "'");
    is.get();  // single whitespace after maxval
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    io_detail::get_bytes(is, raw.data(), raw.size(), "PGM payload");
    Tensor<T> frame({static_cast<std::size_t>(h), static_cast<std::size_t>(w)}, T(0));
    const T scale = T(1) / static_cast<T>(maxval);
    for (std::size_t i = 0; i < raw.size(); ++i) frame[i] = static_cast<T>(raw[i]) * scale;
    return frame;
}

template <typename T = float>
void write_pgm(const std::string& path, const Tensor<T>& frame) {
    if (frame.rank() != 2) throw ShapeError("PGM frames are rank-2");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    os << "P5\n" << frame.extent(1) << ' ' << frame.extent(0) << "\n255\n";
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const double v = std::clamp(static_cast<double>(frame[i]), 0.0, 1.0);
        const auto byte = static_cast<std::uint8_t>(std::lround(v * 255.0));
        os.put(static_cast<char>(byte));
    }
}

// Frames of one clip live as PGM files in a directory, ordered by filename.
template <typename T = float>
FrameSequence<T> read_frame_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw InputError("frame directory '" + dir + "' does not exist");
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pgm")
            names.push_back(entry.path().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw InputError("frame directory '" + dir + "' holds no .pgm files");
    FrameSequence<T> seq;
    seq.frames.reserve(names.size());
    for (const std::string& n : names) seq.frames.push_back(read_pgm<T>(n));
    for (std::size_t i = 1; i < seq.frames.size(); ++i)
        if (!seq.frames[i].same_shape(seq.frames[0]))
            throw InputError("frames in '" + dir + "' differ in size");
    return seq;
}

// ---------------------------------------------------------------------------
// Person bounding boxes: "top left height width" per line, one line per
// frame (a single line applies to every frame).

struct BBox {
    std::size_t top = 0, left = 0, height = 0, width = 0;
};

inline std::vector<BBox> read_bbox_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open bbox file '" + path + "'");
    std::vector<BBox> boxes;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        long t, l, h, w;
        if (!(ls >> t >> l >> h >> w) || t < 0 || l < 0 || h <= 0 || w <= 0)
            throw FormatError("malformed bbox line in '" + path + "': " + line);
        boxes.push_back({static_cast<std::size_t>(t), static_cast<std::size_t>(l),
                         static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
    }
    if (boxes.empty()) throw FormatError("bbox file '" + path + "' is empty");
    return boxes;
}

namespace io_detail {

// Bilinear resize with half-pixel sample centers; a same-size resize is the
// identity, so a crop whose size equals the target round-trips exactly.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& src, std::size_t out_h, std::size_t out_w) {
    const std::size_t in_h = src.extent(0), in_w = src.extent(1);
    Tensor<T> out({out_h, out_w}, T(0));
    const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
    for (std::size_t y = 0; y < out_h; ++y)
        for (std::size_t x = 0; x < out_w; ++x) {
            double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
            double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            fy = std::clamp(fy, 0.0, static_cast<double>(in_h - 1));
            fx = std::clamp(fx, 0.0, static_cast<double>(in_w - 1));
            const std::size_t y0 = static_cast<std::size_t>(fy);
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t y1 = std::min(y0 + 1, in_h - 1);
            const std::size_t x1 = std::min(x0 + 1, in_w - 1);
            const double ay = fy - static_cast<double>(y0);
            const double ax = fx - static_cast<double>(x0);
            const double v = (1 - ay) * ((1 - ax) * src(y0, x0) + ax * src(y0, x1)) +
                             ay * ((1 - ax) * src(y1, x0) + ax * src(y1, x1));
            out(y, x) = static_cast<T>(v);
        }
    return out;
}

}  // namespace io_detail

// Crops the person region and resizes it to the network's spatial input.
template <typename T>
Tensor<T> crop_person_bbox(const Tensor<T>& frame, const BBox& bbox, std::size_t target_h,
                           std::size_t target_w) {
    if (frame.rank() != 2) throw ShapeError("crop expects a rank-2 frame");
    const std::size_t h = frame.extent(0), w = frame.extent(1);
    if (bbox.height == 0 || bbox.width == 0 || bbox.top + bbox.height > h ||
        bbox.left + bbox.width > w)
        throw InputError("bounding box exceeds frame bounds");
    Tensor<T> crop({bbox.height, bbox.width}, T(0));
    for (std::size_t y = 0; y < bbox.height; ++y)
        for (std::size_t x = 0; x < bbox.width; ++x)
            crop(y, x) = frame(bbox.top + y, bbox.left + x);
    return io_detail::resize_bilinear(crop, target_h, target_w);
}

// Fallback when no bbox is supplied: center-crop the largest region with the
// target aspect ratio, then resize.
template <typename T>
Tensor<T> center_crop_resize(const Tensor<T>& frame, std::size_t target_h, std::size_t target_w) {
    if (frame.rank() != 2) throw ShapeError("crop expects a rank-2 frame");
    const std::size_t h = frame.extent(0), w = frame.extent(1);
    const double aspect = static_cast<double>(target_w) / static_cast<double>(target_h);
    std::size_t crop_h = h;
    std::size_t crop_w = static_cast<std::size_t>(std::lround(static_cast<double>(h) * aspect));
    if (crop_w > w) {
        crop_w = w;
        crop_h = static_cast<std::size_t>(std::lround(static_cast<double>(w) / aspect));
        crop_h = std::min(crop_h, h);
    }
    crop_w = std::max<std::size_t>(1, std::min(crop_w, w));
    crop_h = std::max<std::size_t>(1, crop_h);
    const BBox box{(h - crop_h) / 2, (w - crop_w) / 2, crop_h, crop_w};
    return crop_person_bbox(frame, box, target_h, target_w);
}

// ---------------------------------------------------------------------------
// Checkpoints: magic "GWCK", version, preset name, class count, seed, epoch,
// temporal window count, dropout rate, then named parameter tensors, then an
// FNV-1a trailer over all payload bytes. Parameters round-trip bitwise.

inline constexpr char kCheckpointMagic[4] = {'G', 'W', 'C', 'K'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointMeta {
    std::string preset;
    std::uint32_t num_classes = 0;
    std::uint64_t seed = 0;
    std::uint32_t epoch = 0;
    std::uint32_t window_count = 20;
    float dropout_rate = 0.4f;
};

struct NamedTensor {
    std::string name;
    Tensor<float> tensor;
};

struct CheckpointData {
    CheckpointMeta meta;
    std::vector<NamedTensor> tensors;

    const Tensor<float>* find(const std::string& name) const {
        for (const NamedTensor& t : tensors)
            if (t.name == name) return &t.tensor;
        return nullptr;
    }
};

namespace io_detail {

inline void put_string(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    put_bytes(os, s.data(), s.size());
}

inline std::string get_string(std::istream& is, const char* what) {
    const std::uint32_t n = get_u32(is, what);
    if (n > (1u << 20)) throw FormatError(std::string("implausible string length in ") + what);
    std::string s(n, '\0');
    get_bytes(is, s.data(), n, what);
    return s;
}

}  // namespace io_detail

inline void write_checkpoint_data(const std::string& path, const CheckpointData& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    io_detail::put_bytes(os, kCheckpointMagic, 4);
    io_detail::put_u16(os, kCheckpointVersion);
    io_detail::put_u8(os, 0);  // dtype f32
    io_detail::put_string(os, data.meta.preset);
    io_detail::put_u32(os, data.meta.num_classes);
    io_detail::put_u64(os, data.meta.seed);
    io_detail::put_u32(os, data.meta.epoch);
    io_detail::put_u32(os, data.meta.window_count);
    io_detail::put_f32(os, data.meta.dropout_rate);
    io_detail::put_u32(os, static_cast<std::uint32_t>(data.tensors.size()));
    io_detail::Fnv1a64 sum;
    for (const NamedTensor& t : data.tensors) {
        io_detail::put_string(os, t.name);
        io_detail::put_u8(os, static_cast<std::uint8_t>(t.tensor.rank()));
        for (std::size_t e : t.tensor.shape()) io_detail::put_u32(os, static_cast<std::uint32_t>(e));
        for (std::size_t i = 0; i < t.tensor.size(); ++i) {
            const std::uint32_t bits = io_detail::f32_bits(t.tensor[i]);
            std::uint8_t b[4];
            for (int k = 0; k < 4; ++k) b[k] = static_cast<std::uint8_t>(bits >> (8 * k));
            sum.update(b, 4);
            io_detail::put_bytes(os, b, 4);
        }
    }
    io_detail::put_u64(os, sum.state);
    if (!os) throw FormatError("write failure on '" + path + "'");
}

inline CheckpointData read_checkpoint_data(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open '" + path + "' for reading");
    char magic[4];
    io_detail::get_bytes(is, magic, 4, "checkpoint magic");
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw FormatError("'" + path + "' is not a checkpoint (bad magic)");
    const std::uint16_t version = io_detail::get_u16(is, "checkpoint version");
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const std::uint8_t dtype = io_detail::get_u8(is, "checkpoint dtype");
    if (dtype != 0) throw FormatError("unsupported checkpoint dtype tag");
    CheckpointData data;
    data.meta.preset = io_detail::get_string(is, "preset name");
    data.meta.num_classes = io_detail::get_u32(is, "class count");
    data.meta.seed = io_detail::get_u64(is, "seed");
    data.meta.epoch = io_detail::get_u32(is, "epoch");
    data.meta.window_count = io_detail::get_u32(is, "window count");
    data.meta.dropout_rate = io_detail::get_f32(is, "dropout rate");
    const std::uint32_t count = io_detail::get_u32(is, "tensor count");
    io_detail::Fnv1a64 sum;
    data.tensors.reserve(count);
    for (std::uint32_t ti = 0; ti < count; ++ti) {
        NamedTensor t;
        t.name = io_detail::get_string(is, "tensor name");
        const std::uint8_t rank = io_detail::get_u8(is, "tensor rank");
        if (rank == 0 || rank > 8) throw FormatError("implausible tensor rank in checkpoint");
        Shape shape(rank);
        for (std::uint8_t a = 0; a < rank; ++a) {
            shape[a] = io_detail::get_u32(is, "tensor extents");
            if (shape[a] == 0) throw FormatError("zero tensor extent in checkpoint");
        }
        t.tensor = Tensor<float>(shape, 0.0f);
        for (std::size_t i = 0; i < t.tensor.size(); ++i) {
            std::uint8_t b[4];
            io_detail::get_bytes(is, b, 4, "tensor payload");
            sum.update(b, 4);
            std::uint32_t bits = 0;
            for (int k = 3; k >= 0; --k) bits = (bits << 8) | b[k];
            t.tensor[i] = std::bit_cast<float>(bits);
        }
        data.tensors.push_back(std::move(t));
    }
    const std::uint64_t stored = io_detail::get_u64(is, "checksum");
    if (stored != sum.state)
        throw CorruptionError("checkpoint '" + path + "' failed its checksum");
    return data;
}

// Serializes a model (trunk + optional head) and optional LSTM parameters.
inline void save_checkpoint(const std::string& path, const Model<float>& model,
                            const LstmParams<float>* lstm, CheckpointMeta meta) {
    CheckpointData data;
    meta.preset = model.spec.name;
    meta.window_count = static_cast<std::uint32_t>(model.spec.in_t);
    data.meta = std::move(meta);
    for_each_parameter<float>(model, [&](const std::string& name, const Tensor<float>& t, bool) {
        data.tensors.push_back({name, t});
    });
    if (lstm) {
        for_each_lstm_parameter<float>(*lstm, [&](const std::string& name, const Tensor<float>& t) {
            data.tensors.push_back({name, t});
        });
    }
    write_checkpoint_data(path, data);
}

struct LoadedArtifacts {
    Model<float> model;
    std::optional<LstmParams<float>> lstm;
    CheckpointMeta meta;
};

// Rebuilds the model (and LSTM when present) from a checkpoint. The preset
// name must be known and every stored tensor must match its slot's shape.
inline LoadedArtifacts load_checkpoint(const std::string& path) {
    CheckpointData data = read_checkpoint_data(path);
    Rng rng(0);
    LoadedArtifacts out;
    out.meta = data.meta;
    out.model = build_preset<float>(data.meta.preset, data.meta.window_count, rng, InitRule::Zeros,
                                    data.meta.dropout_rate);
    if (data.meta.num_classes > 0) attach_head(out.model, data.meta.num_classes, rng, InitRule::Zeros);

    for_each_parameter<float>(out.model, [&](const std::string& name, Tensor<float>& t, bool) {
        const Tensor<float>* stored = data.find(name);
        if (!stored) throw FormatError("checkpoint misses parameter '" + name + "'");
        if (stored->shape() != t.shape())
            throw FormatError("checkpoint parameter '" + name + "' has shape " +
                              shape_to_string(stored->shape()) + ", expected " +
                              shape_to_string(t.shape()));
        t = *stored;
    });

    if (data.find("LSTM.wx.i")) {
        const Tensor<float>& wxi = *data.find("LSTM.wx.i");
        const std::size_t hidden = wxi.extent(0), input = wxi.extent(1);
        LstmParams<float> lstm = lstm_init<float>(input, hidden, data.meta.num_classes, rng, InitRule::Zeros);
        for_each_lstm_parameter<float>(lstm, [&](const std::string& name, Tensor<float>& t) {
            const Tensor<float>* stored = data.find(name);
            if (!stored) throw FormatError("checkpoint misses parameter '" + name + "'");
            if (stored->shape() != t.shape())
                throw FormatError("checkpoint parameter '" + name + "' shape mismatch");
            t = *stored;
        });
        out.lstm = std::move(lstm);
    }
    return out;
}

}  // namespace gwnet
