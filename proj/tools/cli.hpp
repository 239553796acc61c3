#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cscl4::cli {

enum ExitCode : int { ok = 0, usage = 2, io = 3, solver = 4, format = 5 };

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// key=value lines, '#' comments, as "--key=value" flags (underscores become hyphens).
std::vector<std::string> config_file_flags(const std::string& text);

inline constexpr const char* kTrainLogHeader = "epoch,sparsity_x,sparsity_y,recon_x,recon_y,mmd,manifold,combined";
inline constexpr const char* kMetricsHeader = "phantom_id,psnr_db,ssim,dice_macro,copy_psnr_db,copy_ssim";
inline constexpr const char* kAblationHeader =
    "config,csc,iun,mmd,manifold,psnr_mean,psnr_std,ssim_mean,ssim_std,dice_mean,dice_std";

} // namespace cscl4::cli
