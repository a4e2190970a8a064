#include "reason_iad/config.hpp"

#include <cmath>

#include "reason_iad/error.hpp"

namespace reason_iad {

std::string_view to_string(Setting setting) {
  return setting == Setting::kOneShot ? "one-shot" : "zero-shot";
}

Setting parse_setting(std::string_view text) {
  if (text == "one-shot") return Setting::kOneShot;
  if (text == "zero-shot") return Setting::kZeroShot;
  throw Error("unknown setting '" + std::string(text) + "'");
}

void Config::validate() const {
  if (latent_tokens < 1) throw Error("config: latent_tokens must be >= 1");
  if (top_k < 1) throw Error("config: top_k must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error("config: learning rate must be finite and >= 0");
  }
  if (!(sigma_fraction >= 0.0) || !std::isfinite(sigma_fraction)) {
    throw Error("config: sigma_fraction must be finite and >= 0");
  }
  if (!(init_jitter >= 0.0) || !std::isfinite(init_jitter)) {
    throw Error("config: init_jitter must be finite and >= 0");
  }
}

}  // namespace reason_iad
