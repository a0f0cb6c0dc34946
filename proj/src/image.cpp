#include "uwgan/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "uwgan/error.hpp"

namespace uwgan {

ImageTensor::ImageTensor(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels)
{
    if (height <= 0 || width <= 0 || channels <= 0) {
        throw ValidationError("image extents must be positive, got " + std::to_string(height) + "x" +
                              std::to_string(width) + "x" + std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

ImageTensor::ImageTensor(int height, int width, int channels, std::vector<float> values)
    : ImageTensor(height, width, channels)
{
    if (values.size() != data_.size()) {
        throw ValidationError("image buffer size mismatch");
    }
    data_ = std::move(values);
}

ImageTensor load_image(const std::filesystem::path& path, bool to_rgb)
{
    if (!std::filesystem::is_regular_file(path)) {
        throw ValidationError("cannot decode image " + path.string() + ": no such file");
    }
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_ANYCOLOR | cv::IMREAD_ANYDEPTH);
    if (mat.empty()) {
        throw ValidationError("cannot decode image " + path.string());
    }
    if (mat.rows == 0 || mat.cols == 0) {
        throw ValidationError("image has zero extent: " + path.string());
    }
    // divide rather than multiply by the reciprocal so k/255 comes back exact
    float denom = 255.0f;
    if (mat.depth() == CV_16U) {
        denom = 65535.0f;
    } else if (mat.depth() != CV_8U) {
        throw ValidationError("unsupported pixel depth in " + path.string());
    }
    cv::Mat rgb;
    switch (mat.channels()) {
    case 1:
        rgb = mat;
        break;
    case 3:
        cv::cvtColor(mat, rgb, cv::COLOR_BGR2RGB);
        break;
    case 4:
        cv::cvtColor(mat, rgb, cv::COLOR_BGRA2RGB);
        break;
    default:
        throw ValidationError("unsupported channel count in " + path.string());
    }
    cv::Mat f;
    rgb.convertTo(f, CV_32F);
    const int ch = f.channels();
    ImageTensor out(f.rows, f.cols, ch);
    for (int y = 0; y < f.rows; ++y) {
        const float* row = f.ptr<float>(y);
        float* dst = out.values().data() + static_cast<std::ptrdiff_t>(y) * f.cols * ch;
        for (int i = 0; i < f.cols * ch; ++i) {
            dst[i] = row[i] / denom;
        }
    }
    return (to_rgb && ch == 1) ? replicate_to_rgb(out) : out;
}

void save_png(const ImageTensor& image, const std::filesystem::path& path)
{
    if (image.empty()) {
        throw ValidationError("cannot save empty image to " + path.string());
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const int ch = image.channels();
    cv::Mat mat(image.height(), image.width(), CV_8UC(ch));
    for (int y = 0; y < image.height(); ++y) {
        auto* row = mat.ptr<unsigned char>(y);
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < ch; ++c) {
                const float v = std::clamp(image.at(y, x, c), 0.0f, 1.0f);
                row[x * ch + c] = static_cast<unsigned char>(std::lround(v * 255.0f));
            }
        }
    }
    if (ch == 3) {
        cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
    }
    if (!cv::imwrite(path.string(), mat)) {
        throw RuntimeFailure("cannot write image " + path.string());
    }
}

ImageTensor replicate_to_rgb(const ImageTensor& image)
{
    if (image.channels() == 3) {
        return image;
    }
    if (image.channels() != 1) {
        throw ValidationError("cannot convert " + std::to_string(image.channels()) + "-channel image to RGB");
    }
    ImageTensor out(image.height(), image.width(), 3);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const float v = image.at(y, x, 0);
            out.at(y, x, 0) = v;
            out.at(y, x, 1) = v;
            out.at(y, x, 2) = v;
        }
    }
    return out;
}

ImageTensor resize_bilinear(const ImageTensor& image, int height, int width)
{
    if (height == image.height() && width == image.width()) {
        return image;
    }
    ImageTensor out(height, width, image.channels());
    const double sy = static_cast<double>(image.height()) / height;
    const double sx = static_cast<double>(image.width()) / width;
    for (int y = 0; y < height; ++y) {
        // Pixel-center alignment.
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, image.height() - 1);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, image.width() - 1);
            const double tx = fx - x0;
            for (int c = 0; c < image.channels(); ++c) {
                const double top = image.at(y0, x0, c) * (1.0 - tx) + image.at(y0, x1, c) * tx;
                const double bottom = image.at(y1, x0, c) * (1.0 - tx) + image.at(y1, x1, c) * tx;
                out.at(y, x, c) = static_cast<float>(top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    return out;
}

ImageTensor resize_short_side_center_crop(const ImageTensor& image, int size)
{
    const int short_side = std::min(image.height(), image.width());
    const double scale = static_cast<double>(size) / short_side;
    const int h = std::max(size, static_cast<int>(std::lround(image.height() * scale)));
    const int w = std::max(size, static_cast<int>(std::lround(image.width() * scale)));
    const ImageTensor resized = resize_bilinear(image, h, w);
    const int y0 = (h - size) / 2;
    const int x0 = (w - size) / 2;
    return crop(resized, x0, y0, x0 + size, y0 + size);
}

ImageTensor crop(const ImageTensor& image, int x0, int y0, int x1, int y1)
{
    if (x0 < 0 || y0 < 0 || x1 > image.width() || y1 > image.height() || x1 <= x0 || y1 <= y0) {
        throw ValidationError("crop rectangle outside image bounds");
    }
    ImageTensor out(y1 - y0, x1 - x0, image.channels());
    const std::size_t row_len = static_cast<std::size_t>(x1 - x0) * image.channels();
    for (int y = y0; y < y1; ++y) {
        auto src = image.values().subspan((static_cast<std::size_t>(y) * image.width() + x0) * image.channels(), row_len);
        std::copy(src.begin(), src.end(), out.values().begin() + static_cast<std::ptrdiff_t>((y - y0) * row_len));
    }
    return out;
}

namespace {

Tensor stack(std::span<const ImageTensor> images, double scale, double offset)
{
    if (images.empty()) {
        throw ValidationError("cannot build a batch from zero images");
    }
    const int h = images.front().height();
    const int w = images.front().width();
    Tensor batch(Shape{static_cast<int>(images.size()), 3, h, w});
    for (std::size_t n = 0; n < images.size(); ++n) {
        const ImageTensor& img = images[n];
        if (img.height() != h || img.width() != w || img.channels() != 3) {
            throw ValidationError("batch images must share extents and be RGB");
        }
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    batch.at(static_cast<int>(n), c, y, x) = img.at(y, x, c) * scale + offset;
                }
            }
        }
    }
    return batch;
}

}  // namespace

Tensor to_model_batch(std::span<const ImageTensor> images)
{
    return stack(images, 2.0, -1.0);
}

Tensor to_unit_batch(std::span<const ImageTensor> images)
{
    return stack(images, 1.0, 0.0);
}

std::vector<ImageTensor> from_model_batch(const Tensor& batch)
{
    const Shape& s = batch.shape();
    if (s.c != 3) {
        throw ValidationError("model batch must have 3 channels, got " + to_string(s));
    }
    std::vector<ImageTensor> out;
    out.reserve(s.n);
    for (int n = 0; n < s.n; ++n) {
        ImageTensor img(s.h, s.w, 3);
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) {
                    img.at(y, x, c) = static_cast<float>(std::clamp((batch.at(n, c, y, x) + 1.0) * 0.5, 0.0, 1.0));
                }
            }
        }
        out.push_back(std::move(img));
    }
    return out;
}

}  // namespace uwgan
