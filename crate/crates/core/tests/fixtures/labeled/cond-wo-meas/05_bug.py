from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qc = QuantumCircuit(2, 2)
qc.h(0)
qc.h(1)
if verbose:
    qc.y(0).c_if(0, 1)  # expect: cond-wo-meas
qc.measure(0, 0)
qc.measure(1, 1)
