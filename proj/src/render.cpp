#include "lesplat/render.hpp"

namespace lesplat {

RayWeights ray_weights(const Scene& scene, const Camera& cam, const RenderOptions& opts) {
    const auto splats = detail::prepare_splats(scene, cam);
    RayWeights rw;
    rw.width = cam.width;
    rw.height = cam.height;
    rw.offsets.reserve(cam.pixel_count() + 1);
    rw.offsets.push_back(0);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            detail::composite_pixel<double>(splats, x + 0.5, y + 0.5, opts, [&](std::size_t i, double w) {
                rw.gaussian.push_back(static_cast<std::uint32_t>(i));
                rw.weight.push_back(w);
            });
            rw.offsets.push_back(rw.gaussian.size());
        }
    }
    return rw;
}

} // namespace lesplat
