macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));

            #[test]
            fn runs() {
                main().expect(concat!($file, " should run"));
            }
        }
    };
}

example!(stn_bounds, "stn_bounds.rs");
example!(relaxation, "relaxation.rs");
example!(plan_day, "plan_day.rs");
example!(validate_plan, "validate_plan.rs");
example!(self_reflection, "self_reflection.rs");
example!(commonsense_inference, "commonsense_inference.rs");
example!(refine_request, "refine_request.rs");
example!(personas, "personas.rs");
example!(benchmark, "benchmark.rs");
