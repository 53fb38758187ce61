# check_setup.py
"""
Script para comprobar la instalación del simulador.
Ejecuta: python check_setup.py [--data-dir DIR]
"""

from pathlib import Path
import sys

sys.path.insert(0, str(Path(__file__).parent))

IDX_FILES = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)


def check_configuration():
    """Carga de settings y de los TOML incluidos."""
    print("🔧 Comprobando configuración...")

    try:
        from flcleaner.core.config import load_experiment_config, settings

        print("✅ Settings cargados")
        print(f"   - Entorno: {settings.ENVIRONMENT}")
        print(f"   - Nivel de log: {settings.LOG_LEVEL}")
        print(f"   - Hilos: {settings.max_workers}")

        configs = sorted((Path(__file__).parent / "configs").glob("*.toml"))
        for path in configs:
            load_experiment_config(path)
        print(f"✅ {len(configs)} configuraciones de experimento válidas")
        return True
    except Exception as e:
        print(f"❌ Error en configuración: {e}")
        return False


def check_datasets(data_dir: str):
    """Presencia de los ficheros IDX de MNIST y FashionMNIST."""
    print(f"\n🗄️  Comprobando datasets en {data_dir}...")

    ok = True
    for name in ("mnist", "fashion_mnist"):
        root = Path(data_dir) / name
        missing = [f for f in IDX_FILES if not (root / f).exists() and not (root / f"{f}.gz").exists()]
        if missing:
            print(f"⚠️  {name}: faltan {', '.join(missing)}")
            ok = False
        else:
            print(f"✅ {name}: ficheros IDX presentes")
    if not ok:
        print("   Los experimentos sintéticos (configs/synthetic_smoke.toml) funcionan sin descargas")
    return ok


def check_numerics():
    """Gradiente de la red y oráculos de GeoMed y trust propagation."""
    print("\n🧮 Comprobando núcleo numérico...")

    try:
        from flcleaner.services.oracles import run_geomed_oracle, run_trust_oracle

        print(f"✅ Oráculo GeoMed: {run_geomed_oracle(10, seed=0)}")
        print(f"✅ Oráculo trust: {run_trust_oracle(20, seed=0)}")
        return True
    except Exception as e:
        print(f"❌ Error en el núcleo numérico: {e}")
        return False


def check_smoke_run():
    """Una ronda sintética completa con FL-CLEANER."""
    print("\n🚀 Ejecutando una ronda sintética...")

    try:
        from flcleaner.core.config import load_experiment_config
        from flcleaner.services.experiment import run_experiment

        cfg = load_experiment_config(Path(__file__).parent / "configs" / "synthetic_smoke.toml")
        report = run_experiment(cfg.model_copy(update={"rounds": 1}))[0]
        print("✅ Ronda completada")
        print(f"   - ACC: {report.acc:.4f}")
        print(f"   - Bloqueados: {report.blocked_ids} (atacantes: {report.attacker_ids})")
        return True
    except Exception as e:
        print(f"❌ Error en la ronda sintética: {e}")
        return False


def main():
    """Función principal de comprobación."""
    data_dir = sys.argv[sys.argv.index("--data-dir") + 1] if "--data-dir" in sys.argv else "data"

    print("🧪 COMPROBACIÓN DE LA INSTALACIÓN")
    print("=" * 50)

    checks = [
        ("Configuración", check_configuration),
        ("Datasets", lambda: check_datasets(data_dir)),
        ("Núcleo numérico", check_numerics),
        ("Ronda sintética", check_smoke_run),
    ]

    results = []
    for name, func in checks:
        try:
            results.append((name, func()))
        except Exception as e:
            print(f"❌ Error ejecutando {name}: {e}")
            results.append((name, False))

    print("\n" + "=" * 50)
    print("📊 RESUMEN")
    print("=" * 50)

    passed = sum(1 for _, result in results if result)
    for name, result in results:
        status = "✅ OK" if result else "❌ FALLÓ"
        print(f"{name:20} {status}")

    print(f"\nResultado: {passed}/{len(results)} comprobaciones correctas")

    if passed == len(results):
        print("🎉 Todo listo.")
        print("\nPróximos pasos:")
        print("1. flcleaner run --config configs/mnist_sign_flip.toml --data-dir data")
        print("2. pytest")
        print("3. FLCLEANER_MNIST_DIR=data pytest -m slow")
    else:
        print("⚠️  Algunas comprobaciones fallaron. Revisa la instalación.")
        sys.exit(1)


if __name__ == "__main__":
    main()
