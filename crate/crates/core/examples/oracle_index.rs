//! Exact multi-action indexes of a single arm and of a whole instance.

use rmab::oracles::{oracle_index, IndexMode, IndexTable};
use rmab::{ArmModel, RmabInstance};

fn main() -> rmab::Result<()> {
    // state 1 pays 1 and falls back; in state 0 action 1 lifts the arm
    let lift = ArmModel::new(
        vec![0.0, 1.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
    )?;
    println!(
        "lift arm, beta 0.9: index(s=0, a=1) = {:.6}",
        oracle_index(&lift, 0, 1, 0.9, 1e-10)?
    );

    // costs 0/1/2, more effort raises the chance of the paying state
    let mut t = Vec::new();
    for row in [[0.1, 0.4, 0.6], [0.5, 0.8, 0.9]] {
        for p in row {
            t.extend([1.0 - p, p]);
        }
    }
    let ladder = ArmModel::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0], t)?;
    let inst = RmabInstance::new(vec![lift, ladder], 2.0, 0.9)?;
    let table = IndexTable::compute(&inst, 1e-9, IndexMode::Strict)?;
    table.write_csv(std::io::stdout())?;
    Ok(())
}
