use serde::Serialize;

use super::{Area, HwConfig};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AreaRow {
    pub component: &'static str,
    pub per_subarray: usize,
    pub area: Area,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AreaReport {
    pub rows: Vec<AreaRow>,
    pub per_subarray: Area,
    pub subarrays: usize,
    pub chip: Area,
}

impl AreaReport {
    /// CSV with the same columns as the published component breakdown.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("component,per_subarray,area_mm2\n");
        for row in &self.rows {
            out.push_str(&format!("{},{},{}\n", row.component, row.per_subarray, row.area.mm2()));
        }
        out.push_str(&format!("total_per_subarray,1,{}\n", self.per_subarray.mm2()));
        out.push_str(&format!("chip,{},{}\n", self.subarrays, self.chip.mm2()));
        out
    }
}

pub fn area_report(cfg: &HwConfig) -> AreaReport {
    let a = &cfg.area;
    let cells = (cfg.rows * cfg.cols) as u128;
    let rram = (u128::from(a.rram_reference_nm2) * cells / (128 * 128)) as u64;
    let adcs = cfg.cols / cfg.adc_share.max(1);
    let buffers = cfg.cols / 2;
    let rows = vec![
        AreaRow { component: "RRAM subarray", per_subarray: 1, area: Area(rram) },
        AreaRow {
            component: "Mask registers",
            per_subarray: cfg.rows,
            area: Area(a.mask_register_nm2 * cfg.rows as u64),
        },
        AreaRow {
            component: "WL Gating Control logic",
            per_subarray: cfg.rows,
            area: Area(a.gating_logic_nm2 * cfg.rows as u64),
        },
        AreaRow {
            component: "ADC (8 cols sharing)",
            per_subarray: adcs,
            area: Area(a.adc_nm2 * adcs as u64),
        },
        AreaRow {
            component: "WL Drivers",
            per_subarray: cfg.rows,
            area: Area(a.wl_driver_nm2 * cfg.rows as u64),
        },
        AreaRow { component: "Buffers", per_subarray: buffers, area: Area(a.buffer_nm2 * buffers as u64) },
    ];
    let per_subarray: Area = rows.iter().map(|r| r.area).sum();
    let subarrays = cfg.subarrays();
    AreaReport { rows, per_subarray, subarrays, chip: Area(per_subarray.0 * subarrays as u64) }
}
