#![no_main]

use biqgt_core::expr::Expr;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(source) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(expr) = Expr::parse(source, &["theta", "phi"]) {
        let _ = expr.eval(&[0.3, -1.2]);
    }
    let _ = Expr::constant(source);
});
