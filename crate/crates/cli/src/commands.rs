use std::fmt::Write as _;
use std::path::Path;

use eitshape::fdm::{
    acquire_frames, check_orthogonality, compute_snr, noise_std_for_snr, synthesize_frame, write_frames_csv,
    write_time_series, Acquisition, NoiseModel, MIN_SNR_FRAMES,
};
use eitshape::forward::{
    forward_all, parse_protocol, write_protocol, ConductivityField, Protocol, DEFAULT_CONTACT_IMPEDANCE,
};
use eitshape::inverse::{reconstruct as tikhonov, write_reconstruction_csv, write_vtk, JacobianSvd};
use eitshape::mesh::{
    end_face_electrodes, generate_box_mesh, generate_finger_chamber_mesh, generate_hinged_actuator_mesh,
    parse_mesh, refine_near_electrodes, write_mesh, FingerChamberParams, HingedActuatorParams, Mesh,
};
use eitshape::scenarios::{cross_validated_lambda, run_scenario, CvSettings, ScenarioConfig, FINGER_FREQUENCIES};
use eitshape::sensitivity::{
    compute_jacobian, parse_jacobian, region_density, sensitivity_map, write_jacobian, ColumnBasis, HexSubdomain,
};
use serde_json::json;

use crate::files::{read_column, text, write_voltages, Outputs};
use crate::manifest::Manifest;
use crate::{
    CliError, CliResult, FdmArgs, ForwardArgs, JacobianArgs, MeshArgs, MeshKind, ReconstructArgs, ScenarioArgs,
    SigmaArgs,
};

fn load_mesh(path: &Path, m: &mut Manifest) -> CliResult<Mesh> {
    let t = text(m.input(path)?, path)?;
    Ok(parse_mesh(&t, path)?)
}

fn load_protocol(path: &Path, m: &mut Manifest) -> CliResult<Protocol> {
    let t = text(m.input(path)?, path)?;
    let p = parse_protocol(&t, path)?;
    Ok(p)
}

fn conductivity(args: &SigmaArgs, mesh: &Mesh, m: &mut Manifest) -> CliResult<ConductivityField> {
    let mut values = match &args.sigma_file {
        Some(path) => {
            let t = text(m.input(path)?, path)?;
            read_column(&t, path, &["sigma"])?
        }
        None => vec![args.sigma; mesh.n_elements()],
    };
    if values.len() != mesh.n_elements() {
        return Err(CliError::validation(format!(
            "{} conductivity values for {} elements",
            values.len(),
            mesh.n_elements()
        )));
    }
    for spec in &args.region_sigma {
        let (region, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("--region-sigma `{spec}` is not TAG=VALUE")))?;
        let tag = region
            .parse::<u32>()
            .ok()
            .or_else(|| mesh.region_tag(region))
            .ok_or_else(|| CliError::validation(format!("unknown region `{region}`")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| CliError::validation(format!("--region-sigma `{spec}`: bad value")))?;
        let elements = mesh.elements_in_region(tag);
        if elements.is_empty() {
            return Err(CliError::validation(format!("region {tag} has no elements")));
        }
        for k in elements {
            values[k] = value;
        }
    }
    let s = ConductivityField::new(values)?;
    s.check_against(mesh)?;
    Ok(s)
}

pub fn mesh(a: &MeshArgs, out: &mut Outputs, m: &mut Manifest) -> CliResult<()> {
    let z = a.contact_impedance.unwrap_or(DEFAULT_CONTACT_IMPEDANCE);
    let (mut mesh, protocol) = match a.kind {
        MeshKind::Hinged => {
            let mut p = HingedActuatorParams { contact_impedance: z, ..Default::default() };
            if let Some(h) = a.edge_length {
                p.edge_length = h;
            }
            (generate_hinged_actuator_mesh(&p)?, Protocol::hinged_default())
        }
        MeshKind::Finger => {
            let mut p = FingerChamberParams { contact_impedance: z, ..Default::default() };
            if let Some(h) = a.edge_length {
                p.edge_length = h;
            }
            (generate_finger_chamber_mesh(&p)?, Protocol::two_electrode(FINGER_FREQUENCIES[0])?)
        }
        MeshKind::Box => {
            let base = generate_box_mesh(&a.size, a.edge_length.unwrap_or(1.0))?;
            (end_face_electrodes(&base, 0, z)?, Protocol::two_electrode(1e3)?)
        }
    };
    if let Some(r) = a.refine_radius {
        for _ in 0..a.refine_passes {
            mesh = refine_near_electrodes(&mesh, r, a.refine_factor)?;
        }
    }
    protocol.validate_against(&mesh)?;
    out.write("mesh.eitmesh", write_mesh(&mesh).as_bytes())?;
    out.write("protocol.eitprot", write_protocol(&protocol).as_bytes())?;
    println!(
        "mesh: {} nodes, {} elements, {} electrodes",
        mesh.n_nodes(),
        mesh.n_elements(),
        mesh.electrodes().len()
    );
    m.result("nodes", mesh.n_nodes());
    m.result("elements", mesh.n_elements());
    m.result("electrodes", mesh.electrodes().len());
    m.result("mesh_hash", mesh.content_hash());
    Ok(())
}

pub fn forward(a: &ForwardArgs, out: &mut Outputs, m: &mut Manifest) -> CliResult<()> {
    let mesh = load_mesh(&a.mesh, m)?;
    let protocol = load_protocol(&a.protocol, m)?;
    let sigma = conductivity(&a.sigma, &mesh, m)?;
    let v = forward_all(&mesh, &sigma, &protocol)?;
    out.write("voltages.csv", write_voltages(&protocol, &v).as_bytes())?;
    println!("forward: {} measurements on {} elements", v.len(), mesh.n_elements());
    m.result("measurements", v.len());
    Ok(())
}

pub fn jacobian(a: &JacobianArgs, out: &mut Outputs, m: &mut Manifest) -> CliResult<()> {
    let mesh = load_mesh(&a.mesh, m)?;
    let protocol = load_protocol(&a.protocol, m)?;
    let sigma = conductivity(&a.sigma, &mesh, m)?;
    let j = compute_jacobian(&mesh, &sigma, &protocol)?;
    let rows = j.rows();
    let maps: Vec<Vec<f64>> = (0..rows).map(|r| sensitivity_map(&j, r)).collect::<Result<_, _>>()?;

    let mut density = String::from("measurement,region,density\n");
    for (r, map) in maps.iter().enumerate() {
        for (tag, d) in region_density(&mesh, map) {
            let _ = writeln!(density, "{},{},{}", r + 1, mesh.region_name(tag).unwrap_or("?"), d);
        }
    }
    out.write("region_density.csv", density.as_bytes())?;
    let names: Vec<String> = (1..=rows).map(|r| format!("m{r}")).collect();
    let fields: Vec<(&str, &[f64])> = names.iter().map(String::as_str).zip(maps.iter().map(Vec::as_slice)).collect();
    out.write("sensitivity.vtk", write_vtk(&mesh, &fields)?.as_bytes())?;

    let header = names.join(",");
    let saved = match a.voxel_size {
        None => {
            let mut csv = format!("element_id,region,{header}\n");
            for k in 0..mesh.n_elements() {
                let _ = write!(csv, "{},{}", k + 1, mesh.region_tags()[k]);
                for r in 0..rows {
                    let _ = write!(csv, ",{}", j.matrix[(r, k)]);
                }
                csv.push('\n');
            }
            out.write("sensitivity.csv", csv.as_bytes())?;
            j
        }
        Some(size) => {
            let (jv, hex) = eitshape::sensitivity::aggregate_to_hex(&j, &mesh, size)?;
            let mut csv = format!("voxel_id,x,y,z,{header}\n");
            for c in 0..hex.n_voxels() {
                let p = hex.voxel_centre(c);
                let _ = write!(csv, "{},{},{},{}", c + 1, p[0], p[1], p[2]);
                for r in 0..rows {
                    let _ = write!(csv, ",{}", jv.matrix[(r, c)]);
                }
                csv.push('\n');
            }
            out.write("sensitivity.csv", csv.as_bytes())?;
            jv
        }
    };
    out.write("jacobian.eitjac", &write_jacobian(&saved))?;
    println!("jacobian: {} x {} ({})", saved.rows(), saved.cols(), saved.basis.as_str());
    m.result("rows", saved.rows());
    m.result("cols", saved.cols());
    m.result("basis", saved.basis.as_str());
    Ok(())
}

pub fn reconstruct(a: &ReconstructArgs, seed: u64, out: &mut Outputs, m: &mut Manifest) -> CliResult<()> {
    let bytes = m.input(&a.jacobian)?;
    let j = parse_jacobian(&bytes, &a.jacobian)?;
    let data_text = text(m.input(&a.data)?, &a.data)?;
    let data = read_column(&data_text, &a.data, &["dv", "voltage"])?;
    let reference = match &a.reference {
        Some(path) => {
            let t = text(m.input(path)?, path)?;
            Some(read_column(&t, path, &["voltage", "dv"])?)
        }
        None => None,
    };
    if data.len() != j.rows() {
        return Err(CliError::validation(format!("{} data values for {} measurements", data.len(), j.rows())));
    }
    let dv: Vec<f64> = match &reference {
        Some(r) if r.len() != data.len() => {
            return Err(CliError::validation(format!("{} reference values for {} data values", r.len(), data.len())))
        }
        Some(r) => data.iter().zip(r).map(|(d, r)| d - r).collect(),
        None => data,
    };

    let mesh = match &a.mesh {
        Some(p) => {
            let mesh = load_mesh(p, m)?;
            if mesh.content_hash() != j.provenance.mesh {
                return Err(CliError::validation("mesh does not match the Jacobian's provenance"));
            }
            Some(mesh)
        }
        None => None,
    };
    let hex = match (j.basis, &mesh) {
        (ColumnBasis::Voxels, Some(mesh)) => {
            let size = a
                .voxel_size
                .ok_or_else(|| CliError::validation("voxel Jacobian needs --voxel-size with --mesh"))?;
            let hex = HexSubdomain::build(mesh, size, None)?;
            if hex.n_voxels() != j.cols() {
                return Err(CliError::validation(format!(
                    "voxel size {size} gives {} voxels, Jacobian has {} columns",
                    hex.n_voxels(),
                    j.cols()
                )));
            }
            Some(hex)
        }
        _ => None,
    };

    let svd = JacobianSvd::new(&j)?;
    let s2 = svd.max_singular_value().powi(2);
    let lambda = if a.lambda == "cv" {
        let mesh = mesh.as_ref().ok_or_else(|| CliError::validation("cross-validation needs --mesh"))?;
        let reference = reference.as_ref().ok_or_else(|| CliError::validation("cross-validation needs --reference"))?;
        let centres: Vec<_> = match (&hex, j.basis) {
            (Some(h), _) => (0..h.n_voxels()).map(|c| h.voxel_centre(c)).collect(),
            (None, ColumnBasis::Elements) => (0..mesh.n_elements()).map(|k| mesh.element_centroid(k)).collect(),
            (None, _) => return Err(CliError::validation("voxel Jacobian needs --voxel-size for cross-validation")),
        };
        let cv = CvSettings { training: a.cv_training, snr_db: a.cv_snr_db, seed, ..Default::default() };
        let sel = cross_validated_lambda(&j, &svd, &centres, reference, a.sigma0, &cv)?;
        let mut csv = String::from("lambda,relative_lambda,score\n");
        for (l, s) in sel.grid.iter().zip(&sel.scores) {
            let _ = writeln!(csv, "{l},{},{s}", l / s2);
        }
        out.write("cv_scores.csv", csv.as_bytes())?;
        sel.lambda
    } else {
        let rel: f64 = a
            .lambda
            .parse()
            .map_err(|_| CliError::validation(format!("--lambda `{}` is neither a number nor `cv`", a.lambda)))?;
        if !(rel > 0.0 && rel.is_finite()) {
            return Err(CliError::validation("--lambda must be positive"));
        }
        rel * s2
    };

    let r = tikhonov(&svd.operator(lambda)?, &dv)?;
    match (&mesh, &hex) {
        (Some(mesh), hex) => {
            let per_element = hex.as_ref().map_or_else(|| r.delta_sigma.clone(), |h| h.expand(&r.delta_sigma));
            out.write("reconstruction.csv", write_reconstruction_csv(&per_element).as_bytes())?;
            out.write("reconstruction.vtk", write_vtk(mesh, &[("delta_sigma", &per_element)])?.as_bytes())?;
        }
        (None, _) => {
            let label = match j.basis {
                ColumnBasis::Elements => "element_id",
                ColumnBasis::Voxels => "voxel_id",
            };
            let mut csv = format!("{label},delta_sigma\n");
            for (i, v) in r.delta_sigma.iter().enumerate() {
                let _ = writeln!(csv, "{},{v}", i + 1);
            }
            out.write("reconstruction.csv", csv.as_bytes())?;
        }
    }
    println!("reconstruct: lambda {lambda:.6e} ({:.3e} of s_max^2), residual {:.3e}, norm {:.3e}", lambda / s2, r.residual, r.norm);
    m.result("lambda", lambda);
    m.result("relative_lambda", lambda / s2);
    m.result("residual", r.residual);
    m.result("norm", r.norm);
    Ok(())
}

pub fn fdm(a: &FdmArgs, seed: u64, out: &mut Outputs, m: &mut Manifest) -> CliResult<()> {
    let protocol = load_protocol(&a.protocol, m)?;
    let v = match (&a.voltages, &a.amplitudes) {
        (Some(path), _) => {
            let t = text(m.input(path)?, path)?;
            read_column(&t, path, &["voltage", "dv"])?
        }
        (None, Some(v)) => v.clone(),
        (None, None) => return Err(CliError::validation("give --voltages or --amplitudes")),
    };
    let acq = Acquisition { sample_rate: a.sample_rate, window: a.window, allow_leakage: a.allow_leakage };
    let n = acq.n_samples()?;
    let mut noise = NoiseModel { relative_std: a.relative_std, seed, ..Default::default() };
    if a.no_quantization {
        noise.quantization_step = 0.0;
    }
    if let Some(std) = a.noise_std {
        noise.std = std;
    }
    if let Some(snr) = a.snr_db {
        let mean = v.iter().map(|x| x.abs()).sum::<f64>() / v.len().max(1) as f64;
        noise.std = noise_std_for_snr(mean, snr, n);
    }
    noise.validate()?;
    let ortho = check_orthogonality(&protocol.frequencies(), acq.window, acq.sample_rate);
    if !ortho.passes {
        eprintln!("warning: tones not orthogonal over the window, worst leakage {:.1} dB", ortho.worst_leakage_db);
    }

    let first = synthesize_frame(&protocol, &v, &acq, &noise, 0)?;
    out.write("timeseries.eitts", &write_time_series(&first))?;
    let frames = acquire_frames(&protocol, &v, &acq, &noise, 0, a.repeats)?;
    out.write("frames.csv", write_frames_csv(&frames).as_bytes())?;
    m.result("noise_std", noise.std);
    if frames.len() >= MIN_SNR_FRAMES {
        let snr = compute_snr(&frames)?;
        let mut csv = String::from("measurement,mean_amplitude,snr_db\n");
        for (i, s) in snr.iter().enumerate() {
            let mean = frames.iter().map(|f| f.amplitudes[i]).sum::<f64>() / frames.len() as f64;
            let _ = writeln!(csv, "{},{mean},{s}", i + 1);
        }
        out.write("snr.csv", csv.as_bytes())?;
        let mean_snr = snr.iter().sum::<f64>() / snr.len() as f64;
        println!("fdm: {} frames, mean SNR {mean_snr:.2} dB", frames.len());
        m.result("mean_snr_db", mean_snr);
    } else {
        println!("fdm: {} frames (SNR needs at least {MIN_SNR_FRAMES})", frames.len());
    }
    Ok(())
}

pub fn scenario(a: &ScenarioArgs, seed: u64, out: &mut Outputs, m: &mut Manifest) -> CliResult<()> {
    let t = text(m.input(&a.config)?, &a.config)?;
    let cfg = ScenarioConfig::parse(&t, &a.config)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    for file in [&cfg.mesh.file, &cfg.protocol.file].into_iter().flatten() {
        m.input(&base.join(file))?;
    }
    let report = run_scenario(&cfg, base, out.dir(), seed)?;
    for f in &report.files {
        out.record(&f.to_string_lossy())?;
    }
    print!("{}", report.summary);
    m.result("passed", report.passed());
    if let Some(l) = report.lambda {
        m.result("lambda", l);
    }
    m.result(
        "checks",
        report
            .checks
            .iter()
            .map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail}))
            .collect::<Vec<_>>(),
    );
    Ok(())
}
