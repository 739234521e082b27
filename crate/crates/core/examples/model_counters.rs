//! Prints parameter and FLOP counts for the default teacher and student.

use thermopose::cli::RunConfig;
use thermopose::posemodel::{build_decoder, Block, PoseModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::default();
    for (name, mc) in [("teacher", cfg.teacher_model()), ("student", cfg.student_model())] {
        let model = PoseModel::new(mc.clone(), 0)?;
        println!(
            "{name}: input {:?} -> latent {:?} -> heatmaps {:?}; {} params, {} FLOPs",
            model.input_shape(),
            model.latent_shape(),
            model.heatmap_shape(),
            model.count_params(),
            model.count_flops()?
        );
        let (enc, dec) = (mc.encoder.build()?, build_decoder(&mc.decoder)?);
        for block in enc.blocks.iter().chain(&dec.blocks) {
            let convs: Vec<String> = block.convs().iter().map(|c| format!("{}({}→{}, k{} s{})", c.name, c.c_in, c.c_out, c.k, c.stride)).collect();
            let tag = if matches!(block, Block::Bottleneck { residual: true, .. }) { " +residual" } else { "" };
            println!("  {}{tag}", convs.join(" "));
        }
    }
    Ok(())
}
