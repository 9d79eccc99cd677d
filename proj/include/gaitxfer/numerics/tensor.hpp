#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace gaitxfer::nx {

using Shape = std::vector<std::size_t>;

/// Cache-line aligned storage. Vectorized reductions peel a prefix that
/// depends on the start address, so alignment keeps results reproducible
/// across allocations.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept
    {
    }

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept
    {
        return true;
    }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

inline std::size_t shape_size(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

/// Raised when an operation receives operands whose shapes do not fit together.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major tensor with owned storage.
///
/// Sequence activations use the channel-major layout [C, B, T] so that a
/// channel concatenation is a plain append and a rank-2 [C, T] tensor is a
/// batch of one.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{0})
        : shape_(std::move(shape)), data_(shape_size(shape_), fill)
    {
    }

    Tensor(Shape shape, std::initializer_list<T> data)
        : Tensor(std::move(shape), AlignedVector<T>(data))
    {
    }

    Tensor(Shape shape, const std::vector<T>& data)
        : Tensor(std::move(shape), AlignedVector<T>(data.begin(), data.end()))
    {
    }

    Tensor(Shape shape, AlignedVector<T> data)
        : shape_(std::move(shape)), data_(std::move(data))
    {
        if (shape_size(shape_) != data_.size()) {
            throw ShapeError("tensor shape " + shape_str(shape_) + " holds " +
                             std::to_string(shape_size(shape_)) + " values, got " +
                             std::to_string(data_.size()));
        }
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    T* ptr() noexcept { return data_.data(); }
    const T* ptr() const noexcept { return data_.data(); }
    AlignedVector<T>& storage() noexcept { return data_; }
    const AlignedVector<T>& storage() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    T& at(std::size_t i, std::size_t j, std::size_t k)
    {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const T& at(std::size_t i, std::size_t j, std::size_t k) const
    {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    /// Same data viewed under a new shape with equal element count.
    Tensor reshaped(Shape shape) const
    {
        return Tensor(std::move(shape), data_);
    }

    template <class U>
    Tensor<U> cast() const
    {
        AlignedVector<U> out(data_.size());
        std::transform(data_.begin(), data_.end(), out.begin(),
                       [](T v) { return static_cast<U>(v); });
        return Tensor<U>(shape_, std::move(out));
    }

    bool all_finite() const
    {
        if constexpr (std::is_same_v<T, float> || std::is_same_v<T, double>) {
            // exponent all ones <=> inf or nan; integer OR-reduction vectorizes
            using U = std::conditional_t<std::is_same_v<T, float>, std::uint32_t, std::uint64_t>;
            constexpr U exp_mask = static_cast<U>(std::is_same_v<T, float> ? 0x7f800000ull : 0x7ff0000000000000ull);
            U bad = 0;
            for (T v : data_) bad |= static_cast<U>((std::bit_cast<U>(v) & exp_mask) == exp_mask);
            return bad == 0;
        } else {
            return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
        }
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    AlignedVector<T> data_;
};

/// Interprets a rank-2 [C, T] or rank-3 [C, B, T] tensor as a sequence batch.
struct SeqDims {
    std::size_t channels;
    std::size_t batch;
    std::size_t steps;

    std::size_t columns() const noexcept { return batch * steps; }
};

template <class T>
SeqDims seq_dims(const Tensor<T>& x, const char* op)
{
    if (x.rank() == 2) return {x.dim(0), 1, x.dim(1)};
    if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2)};
    throw ShapeError(std::string(op) + ": expected [C, T] or [C, B, T] input, got " +
                     shape_str(x.shape()));
}

template <class T>
Shape seq_shape_like(const Tensor<T>& x, std::size_t channels)
{
    Shape s = x.shape();
    s[0] = channels;
    return s;
}

} // namespace gaitxfer::nx
