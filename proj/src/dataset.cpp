#include "tstcc/dataset.hpp"

#include "tstcc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tstcc {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'D', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& buf, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

void put_i64(std::string& buf, int64_t v) { put_u64(buf, static_cast<uint64_t>(v)); }

class Reader {
public:
    Reader(const std::string& bytes, std::string origin)
        : bytes_(bytes), origin_(std::move(origin)) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }

    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    int64_t i64() { return static_cast<int64_t>(u64()); }

    void raw(char* out, size_t n) {
        need(n);
        std::memcpy(out, bytes_.data() + pos_, n);
        pos_ += n;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(size_t n) {
        if (pos_ + n > bytes_.size()) throw DataError(origin_ + ": truncated payload");
    }

    const std::string& bytes_;
    std::string origin_;
    size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(path + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError(path + ": write failed");
}

std::string base_name(const std::string& path) {
    const size_t slash = path.find_last_of("/\\");
    return slash == std::string::npos ? path : path.substr(slash + 1);
}

}  // namespace

Dataset::Dataset(Tensor<float> samples, std::vector<int64_t> labels, int64_t num_classes,
                 std::string name)
    : samples_(std::move(samples)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      name_(std::move(name)) {
    if (samples_.rank() != 3) throw DataError("dataset: samples must be (N,C,T)");
    if (static_cast<int64_t>(labels_.size()) != samples_.dim(0))
        throw DataError("dataset: label count does not match sample count");
    if (num_classes_ < 1) throw DataError("dataset: need at least one class");
    for (int64_t y : labels_)
        if (y != -1 && (y < 0 || y >= num_classes_))
            throw DataError("dataset: label out of range");
    if (!samples_.all_finite()) throw DataError("dataset: non-finite sample value");
}

const std::vector<int64_t>& Dataset::labels() const {
    if (trap_) throw std::logic_error("dataset '" + name_ + "': label access is trapped");
    return labels_;
}

int64_t Dataset::label(int64_t i) const {
    if (trap_) throw std::logic_error("dataset '" + name_ + "': label access is trapped");
    return labels_.at(static_cast<size_t>(i));
}

void Dataset::set_label(int64_t i, int64_t value) {
    if (value != -1 && (value < 0 || value >= num_classes_))
        throw DataError("dataset: label out of range");
    labels_.at(static_cast<size_t>(i)) = value;
}

bool Dataset::fully_labeled() const {
    for (int64_t y : labels()) {
        if (y < 0) return false;
    }
    return true;
}

Dataset load_dataset(const std::string& path) {
    const std::string bytes = read_file(path);
    Reader r(bytes, path);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw DataError(path + ": magic mismatch, not a TSD1 file");
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw DataError(path + ": unsupported TSD1 version " + std::to_string(version));
    const uint64_t n = r.u64();
    const uint32_t c = r.u32();
    const uint32_t t = r.u32();
    const uint32_t k = r.u32();
    if (c == 0 || t == 0 || k == 0) throw DataError(path + ": zero dimension in header");

    Tensor<float> samples({static_cast<int64_t>(n), static_cast<int64_t>(c), static_cast<int64_t>(t)});
    for (int64_t i = 0; i < samples.numel(); ++i) samples[i] = r.f32();
    std::vector<int64_t> labels(n);
    for (uint64_t i = 0; i < n; ++i) {
        labels[i] = r.i64();
        if (labels[i] != -1 && (labels[i] < 0 || labels[i] >= static_cast<int64_t>(k)))
            throw DataError(path + ": label out of range (sample " + std::to_string(i) + " has " +
                            std::to_string(labels[i]) + ", K=" + std::to_string(k) + ")");
    }
    if (!r.at_end()) throw DataError(path + ": trailing bytes after payload");
    Dataset d(std::move(samples), std::move(labels), static_cast<int64_t>(k), base_name(path));
    return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
    std::string buf;
    buf.reserve(24 + static_cast<size_t>(d.samples().numel()) * 4 + static_cast<size_t>(d.n()) * 8);
    buf.append(kMagic, 4);
    put_u32(buf, kVersion);
    put_u64(buf, static_cast<uint64_t>(d.n()));
    put_u32(buf, static_cast<uint32_t>(d.channels()));
    put_u32(buf, static_cast<uint32_t>(d.timesteps()));
    put_u32(buf, static_cast<uint32_t>(d.num_classes()));
    for (int64_t i = 0; i < d.samples().numel(); ++i) put_f32(buf, d.samples()[i]);
    for (int64_t y : d.labels()) put_i64(buf, y);
    write_file(path, buf);
}

Dataset dataset_from_csv(const std::string& path, int64_t channels, int64_t timesteps,
                         int64_t num_classes) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open file");
    const int64_t values_per_row = channels * timesteps;
    std::vector<float> values;
    std::vector<int64_t> labels;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (static_cast<int64_t>(cells.size()) != values_per_row + 1)
            throw DataError(path + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(values_per_row + 1) + " columns, got " +
                            std::to_string(cells.size()));
        for (int64_t j = 0; j <= values_per_row; ++j) {
            const std::string& s = cells[static_cast<size_t>(j)];
            try {
                size_t used = 0;
                if (j < values_per_row) {
                    values.push_back(std::stof(s, &used));
                } else {
                    labels.push_back(std::stoll(s, &used));
                }
                while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
                if (used != s.size()) throw std::invalid_argument("trailing junk");
            } catch (const std::exception&) {
                throw DataError(path + ": line " + std::to_string(line_no) +
                                ": non-numeric cell '" + s + "'");
            }
        }
    }
    const int64_t n = static_cast<int64_t>(labels.size());
    Tensor<float> samples({n, channels, timesteps}, std::move(values));
    try {
        return Dataset(std::move(samples), std::move(labels), num_classes, base_name(path));
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

NormStats compute_minmax(const Dataset& d) {
    const int64_t c = d.channels();
    NormStats s;
    s.min.assign(static_cast<size_t>(c), 0.0f);
    s.max.assign(static_cast<size_t>(c), 0.0f);
    if (d.n() == 0) throw DataError("compute_minmax: empty dataset");
    for (int64_t ch = 0; ch < c; ++ch) {
        float lo = d.samples().at3(0, ch, 0);
        float hi = lo;
        for (int64_t i = 0; i < d.n(); ++i)
            for (int64_t j = 0; j < d.timesteps(); ++j) {
                const float v = d.samples().at3(i, ch, j);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        s.min[static_cast<size_t>(ch)] = lo;
        s.max[static_cast<size_t>(ch)] = hi;
    }
    return s;
}

Dataset apply_minmax(const Dataset& d, const NormStats& stats) {
    if (static_cast<int64_t>(stats.min.size()) != d.channels())
        throw DataError("apply_minmax: stats channel count mismatch");
    Tensor<float> out(d.samples().shape());
    for (int64_t i = 0; i < d.n(); ++i)
        for (int64_t ch = 0; ch < d.channels(); ++ch) {
            const float lo = stats.min[static_cast<size_t>(ch)];
            const float range = stats.max[static_cast<size_t>(ch)] - lo;
            for (int64_t j = 0; j < d.timesteps(); ++j) {
                const float v = d.samples().at3(i, ch, j);
                out.at3(i, ch, j) = range > 0 ? (v - lo) / range : 0.0f;
            }
        }
    return Dataset(std::move(out), d.labels(), d.num_classes(), d.name());
}

Dataset normalize_minmax(const Dataset& d) { return apply_minmax(d, compute_minmax(d)); }

LabeledSplit split_labeled_subset(const Dataset& d, double fraction, uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw DataError("split: fraction must be in (0, 1]");
    if (!d.fully_labeled()) throw DataError("split: source dataset must be fully labeled");
    const int64_t n = d.n();
    const int64_t k = d.num_classes();
    const int64_t want = std::llround(fraction * static_cast<double>(n));
    if (want < k) throw DataError("split: fraction too small for stratified split");

    std::vector<std::vector<int64_t>> by_class(static_cast<size_t>(k));
    for (int64_t i = 0; i < n; ++i) by_class.at(static_cast<size_t>(d.label(i))).push_back(i);
    for (int64_t c = 0; c < k; ++c)
        if (by_class[static_cast<size_t>(c)].empty())
            throw DataError("split: class " + std::to_string(c) + " has no samples");

    // Proportional quotas, at least one per class, adjusted to the exact
    // total by largest remainder (ties broken by class index).
    std::vector<int64_t> quota(static_cast<size_t>(k));
    std::vector<double> remainder(static_cast<size_t>(k));
    int64_t assigned = 0;
    for (int64_t c = 0; c < k; ++c) {
        const double exact = fraction * static_cast<double>(by_class[static_cast<size_t>(c)].size());
        quota[static_cast<size_t>(c)] = std::max<int64_t>(1, static_cast<int64_t>(exact));
        quota[static_cast<size_t>(c)] = std::min<int64_t>(
            quota[static_cast<size_t>(c)],
            static_cast<int64_t>(by_class[static_cast<size_t>(c)].size()));
        remainder[static_cast<size_t>(c)] = exact - static_cast<double>(quota[static_cast<size_t>(c)]);
        assigned += quota[static_cast<size_t>(c)];
    }
    while (assigned < want) {
        int64_t best = -1;
        for (int64_t c = 0; c < k; ++c) {
            if (quota[static_cast<size_t>(c)] >=
                static_cast<int64_t>(by_class[static_cast<size_t>(c)].size()))
                continue;
            if (best < 0 || remainder[static_cast<size_t>(c)] > remainder[static_cast<size_t>(best)])
                best = c;
        }
        if (best < 0) break;
        ++quota[static_cast<size_t>(best)];
        remainder[static_cast<size_t>(best)] -= 1.0;
        ++assigned;
    }
    while (assigned > want) {
        int64_t best = -1;
        for (int64_t c = 0; c < k; ++c) {
            if (quota[static_cast<size_t>(c)] <= 1) continue;
            if (best < 0 || remainder[static_cast<size_t>(c)] < remainder[static_cast<size_t>(best)])
                best = c;
        }
        if (best < 0) break;
        --quota[static_cast<size_t>(best)];
        remainder[static_cast<size_t>(best)] += 1.0;
        --assigned;
    }

    RngStream rng(seed);
    std::vector<char> picked(static_cast<size_t>(n), 0);
    for (int64_t c = 0; c < k; ++c) {
        auto& members = by_class[static_cast<size_t>(c)];
        RngStream cs = rng.split(static_cast<uint64_t>(c));
        for (size_t i = members.size(); i > 1; --i)
            std::swap(members[i - 1], members[cs.below(i)]);
        for (int64_t i = 0; i < quota[static_cast<size_t>(c)]; ++i)
            picked[static_cast<size_t>(members[static_cast<size_t>(i)])] = 1;
    }

    const int64_t c_dim = d.channels(), t_dim = d.timesteps();
    auto gather = [&](bool take_picked, bool keep_labels) {
        int64_t count = 0;
        for (int64_t i = 0; i < n; ++i)
            if (static_cast<bool>(picked[static_cast<size_t>(i)]) == take_picked) ++count;
        Tensor<float> xs({count, c_dim, t_dim});
        std::vector<int64_t> ys(static_cast<size_t>(count));
        int64_t w = 0;
        for (int64_t i = 0; i < n; ++i) {
            if (static_cast<bool>(picked[static_cast<size_t>(i)]) != take_picked) continue;
            std::memcpy(xs.data() + w * c_dim * t_dim, d.samples().data() + i * c_dim * t_dim,
                        static_cast<size_t>(c_dim * t_dim) * sizeof(float));
            ys[static_cast<size_t>(w)] = keep_labels ? d.label(i) : -1;
            ++w;
        }
        return Dataset(std::move(xs), std::move(ys), k, d.name());
    };

    LabeledSplit out;
    out.labeled = gather(true, true);
    out.unlabeled = gather(false, false);
    out.fraction = fraction;
    out.seed = seed;
    return out;
}

Dataset make_synthetic(int64_t n_per_class, int64_t channels, int64_t timesteps,
                       int64_t num_classes, double noise_sigma, uint64_t seed) {
    if (n_per_class < 1 || channels < 1 || timesteps < 1 || num_classes < 1)
        throw DataError("make_synthetic: all sizes must be >= 1");
    const int64_t n = n_per_class * num_classes;
    Tensor<float> xs({n, channels, timesteps});
    std::vector<int64_t> ys(static_cast<size_t>(n));

    constexpr double kBaseFrequency = 2.0;  // cycles per window for class 0
    constexpr double kTwoPi = 6.283185307179586;
    constexpr double kGoldenFrac = 0.6180339887498949;
    constexpr double kPhaseJitter = 1.0471975511965976;  // pi/3
    RngStream root(seed);

    // Base phases define the classes, so they are a fixed function of (class,
    // channel) and independent of the seed: two generator calls with disjoint
    // seeds yield a train/test pair of the same task, differing only in the
    // per-sample draws. Each sample adds a bounded phase draw, which gives
    // classes genuine intra-class variability (a per-class template plus
    // noise would make two labeled examples enough for any classifier).
    std::vector<double> base_phase(static_cast<size_t>(num_classes * channels));
    for (int64_t k = 0; k < num_classes; ++k)
        for (int64_t c = 0; c < channels; ++c) {
            const double frac =
                std::fmod(static_cast<double>(k * channels + c + 1) * kGoldenFrac, 1.0);
            base_phase[static_cast<size_t>(k * channels + c)] = kTwoPi * frac;
        }

    for (int64_t i = 0; i < n; ++i) {
        const int64_t k = i % num_classes;
        ys[static_cast<size_t>(i)] = k;
        RngStream draws = root.split(1000 + static_cast<uint64_t>(i));
        const double phase_draw = kPhaseJitter * (2.0 * draws.uniform() - 1.0);
        const double freq =
            static_cast<double>(k + 1) / static_cast<double>(timesteps) * kBaseFrequency;
        for (int64_t c = 0; c < channels; ++c) {
            const double ph = base_phase[static_cast<size_t>(k * channels + c)] + phase_draw;
            for (int64_t t = 0; t < timesteps; ++t) {
                double v = std::sin(kTwoPi * freq * static_cast<double>(t) + ph);
                if (noise_sigma > 0) v += noise_sigma * draws.normal();
                xs.at3(i, c, t) = static_cast<float>(v);
            }
        }
    }
    return Dataset(std::move(xs), std::move(ys), num_classes, "synthetic");
}

BatchIterator::BatchIterator(const Dataset& d, int64_t batch_size,
                             std::optional<uint64_t> shuffle_seed, bool include_labels)
    : data_(d), batch_size_(batch_size), include_labels_(include_labels) {
    if (batch_size_ < 1) throw DataError("batch_iterator: batch size must be >= 1");
    order_.resize(static_cast<size_t>(d.n()));
    std::iota(order_.begin(), order_.end(), 0);
    if (shuffle_seed) {
        RngStream rng(*shuffle_seed);
        for (size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
    }
}

bool BatchIterator::next(Batch& out) {
    const int64_t n = static_cast<int64_t>(order_.size());
    if (cursor_ >= n) return false;
    const int64_t b = std::min(batch_size_, n - cursor_);
    const int64_t c = data_.channels(), t = data_.timesteps();
    out.x = Tensor<float>({b, c, t});
    out.y.assign(static_cast<size_t>(b), -1);
    for (int64_t i = 0; i < b; ++i) {
        const int64_t src = order_[static_cast<size_t>(cursor_ + i)];
        std::memcpy(out.x.data() + i * c * t, data_.samples().data() + src * c * t,
                    static_cast<size_t>(c * t) * sizeof(float));
        if (include_labels_) out.y[static_cast<size_t>(i)] = data_.label(src);
    }
    cursor_ += b;
    return true;
}

Dataset concat_datasets(const Dataset& a, const Dataset& b) {
    if (a.channels() != b.channels() || a.timesteps() != b.timesteps() ||
        a.num_classes() != b.num_classes())
        throw DataError("concat: incompatible datasets");
    Tensor<float> xs({a.n() + b.n(), a.channels(), a.timesteps()});
    std::memcpy(xs.data(), a.samples().data(), static_cast<size_t>(a.samples().numel()) * sizeof(float));
    std::memcpy(xs.data() + a.samples().numel(), b.samples().data(),
                static_cast<size_t>(b.samples().numel()) * sizeof(float));
    std::vector<int64_t> ys = a.labels();
    ys.insert(ys.end(), b.labels().begin(), b.labels().end());
    return Dataset(std::move(xs), std::move(ys), a.num_classes(), a.name());
}

}  // namespace tstcc
