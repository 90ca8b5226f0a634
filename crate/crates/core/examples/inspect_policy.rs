//! Prints a policy's action distribution over a grid of normalized states.
//!
//! ```text
//! cargo run --release --example inspect_policy -- policies/tp-drim-a-uom-vs-cf.bin drim-a
//! ```

use slcim::rl::{load_params, policy_forward};
use slcim::strategies::{action_space, Scheme};

fn main() -> slcim::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().expect("usage: inspect_policy <policy.bin> <scheme>");
    let scheme: Scheme = args.next().as_deref().unwrap_or("drim-a").parse()?;
    let actions = action_space(scheme);
    let params = load_params(&path, Some(actions.len()))?;
    print!("{:>6} {:>6}", "edges", "maxdeg");
    for a in actions {
        print!("{:>8}", a.name());
    }
    println!();
    for e in [1.0, 0.75, 0.5, 0.25, 0.05] {
        for d in [1.0, 0.5, 0.1] {
            print!("{e:>6.2} {d:>6.2}");
            for p in policy_forward(&params, &[e, d])? {
                print!("{p:>8.3}");
            }
            println!();
        }
    }
    Ok(())
}
